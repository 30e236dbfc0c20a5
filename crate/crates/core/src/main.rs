use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use percolab::cli::{parse_config, run_experiment, run_verification_suite, VerifyLevel, EXIT_IO, EXIT_USAGE, EXIT_VERIFY};
use percolab::Error;

/// Arm-event Monte Carlo experiments and exact verification suites.
#[derive(Parser, Debug)]
#[command(name = "perco", version)]
struct Args {
    /// Experiment configuration file.
    #[arg(long, required_unless_present = "verify")]
    config: Option<PathBuf>,
    /// Output directory, overriding the config.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Master seed, overriding PERCO_SEED and the config.
    #[arg(long)]
    seed: Option<u64>,
    /// Sampling threads, overriding the config.
    #[arg(long)]
    workers: Option<usize>,
    /// Run the verification suite at this level instead of an experiment.
    #[arg(long, value_parser = ["fast", "full"])]
    verify: Option<String>,
}

fn code(e: &Error) -> u8 {
    match e {
        Error::Io { .. } => EXIT_IO as u8,
        _ => EXIT_USAGE as u8,
    }
}

fn run(args: Args) -> Result<u8, Error> {
    if let Some(level) = args.verify {
        let report = run_verification_suite(level.parse::<VerifyLevel>()?)?;
        print!("{}", report.to_text());
        return Ok(if report.passed() { 0 } else { EXIT_VERIFY as u8 });
    }
    let path = args.config.expect("required by clap");
    let text = std::fs::read_to_string(&path).map_err(|source| Error::Io { path: path.clone(), source })?;
    let mut cfg = parse_config(&text)?;
    if let Ok(env) = std::env::var("PERCO_SEED") {
        cfg.seed = env
            .trim()
            .parse()
            .map_err(|_| Error::Domain(format!("PERCO_SEED `{env}` is not an unsigned integer")))?;
    }
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    if let Some(out) = args.out {
        cfg.out_dir = out;
    }
    if let Some(workers) = args.workers {
        cfg.workers = workers;
    }
    let (records, fit) = run_experiment(&cfg)?;
    for r in &records {
        println!("N={:<5} hits={:<8} p_hat={:.6} stderr={:.6}", r.query.outer, r.hits, r.p_hat, r.stderr);
    }
    println!(
        "alpha_hat={:.4} ci95=({:.4}, {:.4}) written to {}",
        fit.alpha_hat,
        fit.ci_low,
        fit.ci_high,
        cfg.out_dir.display()
    );
    Ok(0)
}

fn main() -> ExitCode {
    let args = match Args::try_parse() {
        Ok(a) => a,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_USAGE as u8 } else { 0 });
        }
    };
    match run(args) {
        Ok(c) => ExitCode::from(c),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(code(&e))
        }
    }
}
