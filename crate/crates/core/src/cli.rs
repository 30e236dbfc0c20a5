//! Experiment configuration, execution and output files, and the
//! verification suite behind `--verify`.
//!
//! Configuration files are `key = value` lines grouped under `[experiment]`,
//! `[sampling]` and `[output]`; `#` starts a comment.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::arms::{max_disjoint_arms, min_black_on_circuit, SigmaClass};
use crate::boolcube::{check_reimer, CubeEvent};
use crate::error::{Error, Result};
use crate::estimate::{estimate_schedule, fit_exponent, fkg_exact, EstimateRecord, ExponentFit, SamplingOptions};
use crate::lattice::{min_inner_radius, Annulus};
use crate::sample::{sample_config, Color, PhiloxRng, SeedSpec};
use crate::surgery::{check_reroute, increase_winding, reroute, synthetic_reroute_instance, synthetic_winding_families};
use crate::winding::{enumerate_simple_arms, single_arm_winding_sheets};

pub const DEFAULT_SAMPLES: u64 = 100_000;
/// Default schedule: `N = n * 2^k` for these `k`.
const DEFAULT_DOUBLINGS: std::ops::RangeInclusive<u32> = 3..=7;

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_VERIFY: i32 = 2;
pub const EXIT_IO: i32 = 3;

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig {
    pub query: SigmaClass,
    pub j: usize,
    pub n: u32,
    pub schedule: Vec<u32>,
    pub samples: u64,
    pub seed: u64,
    pub workers: usize,
    pub out_dir: PathBuf,
    /// Site density other than 1/2, for diagnostics only.
    pub p_override: Option<f64>,
}

impl ExperimentConfig {
    pub fn sampling(&self) -> SamplingOptions {
        SamplingOptions {
            workers: self.workers,
            p: self.p_override.unwrap_or(0.5),
        }
    }

    /// Checks the invariants; failures are reported against `line`.
    fn validate(&self, line: usize) -> Result<()> {
        let err = |message: String| Error::Parse { line, message };
        if self.samples == 0 {
            return Err(err("samples must be at least 1".into()));
        }
        if self.workers == 0 {
            return Err(err("workers must be at least 1".into()));
        }
        if self.schedule.is_empty() || self.schedule.windows(2).any(|w| w[0] >= w[1]) {
            return Err(err("N schedule must be non-empty and strictly increasing".into()));
        }
        if let Some(p) = self.p_override {
            if !(0.0..=1.0).contains(&p) {
                return Err(err(format!("p = {p} is not a probability")));
            }
        }
        for &outer in &self.schedule {
            crate::arms::ArmQuery::new(self.j, self.query, self.n, outer).map_err(|e| err(e.to_string()))?;
        }
        Ok(())
    }

    /// The config as text that [`parse_config`] reads back to an equal value.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "[experiment]");
        let _ = writeln!(s, "query = {}", self.query.name());
        let _ = writeln!(s, "j = {}", self.j);
        let _ = writeln!(s, "n = {}", self.n);
        let sched: Vec<String> = self.schedule.iter().map(u32::to_string).collect();
        let _ = writeln!(s, "N = {}", sched.join(" "));
        let _ = writeln!(s, "\n[sampling]");
        let _ = writeln!(s, "samples = {}", self.samples);
        let _ = writeln!(s, "seed = {}", self.seed);
        let _ = writeln!(s, "workers = {}", self.workers);
        if let Some(p) = self.p_override {
            let _ = writeln!(s, "p = {p}");
        }
        let _ = writeln!(s, "\n[output]");
        let _ = writeln!(s, "dir = {}", self.out_dir.display());
        s
    }
}

fn parse_value<T: std::str::FromStr>(line: usize, key: &str, v: &str) -> Result<T> {
    v.parse().map_err(|_| Error::Parse {
        line,
        message: format!("malformed value `{v}` for `{key}`"),
    })
}

/// Parses and validates a configuration. Defaults: `n = max(4, n0(j))`,
/// `N = n * {8, 16, 32, 64, 128}`, `samples = 100000`, `seed = 0`,
/// `workers = 1`, `dir = out`.
pub fn parse_config(text: &str) -> Result<ExperimentConfig> {
    let mut section: Option<&str> = None;
    let mut query = None;
    let mut j = None;
    let mut n = None;
    let mut schedule: Option<Vec<u32>> = None;
    let mut samples = DEFAULT_SAMPLES;
    let mut seed = 0;
    let mut workers = 1;
    let mut out_dir = PathBuf::from("out");
    let mut p_override = None;
    let mut last_line = 0;
    let mut seen = std::collections::HashSet::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let body = raw.split('#').next().unwrap().trim();
        if body.is_empty() {
            continue;
        }
        let err = |message: String| Error::Parse { line, message };
        if let Some(name) = body.strip_prefix('[').and_then(|b| b.strip_suffix(']')) {
            let name = name.trim();
            if !matches!(name, "experiment" | "sampling" | "output") {
                return Err(err(format!("unknown section [{name}]")));
            }
            section = Some(match name {
                "experiment" => "experiment",
                "sampling" => "sampling",
                _ => "output",
            });
            continue;
        }
        let Some((key, value)) = body.split_once('=') else {
            return Err(err(format!("expected `key = value`, got `{body}`")));
        };
        let (key, value) = (key.trim(), value.trim());
        let Some(sec) = section else {
            return Err(err(format!("`{key}` appears before any [section]")));
        };
        if !seen.insert((sec, key.to_string())) {
            return Err(err(format!("`{key}` set twice")));
        }
        last_line = line;
        match (sec, key) {
            ("experiment", "query") => {
                query = Some(SigmaClass::from_name(value).ok_or_else(|| err(format!("unknown query class `{value}`")))?)
            }
            ("experiment", "j") => j = Some(parse_value(line, key, value)?),
            ("experiment", "n") => n = Some(parse_value(line, key, value)?),
            ("experiment", "N") => {
                let list: Result<Vec<u32>> = value
                    .split(|c: char| c == ',' || c.is_whitespace())
                    .filter(|t| !t.is_empty())
                    .map(|t| parse_value(line, key, t))
                    .collect();
                schedule = Some(list?);
            }
            ("sampling", "samples") => samples = parse_value(line, key, value)?,
            ("sampling", "seed") => seed = parse_value(line, key, value)?,
            ("sampling", "workers") => workers = parse_value(line, key, value)?,
            ("sampling", "p") => p_override = Some(parse_value(line, key, value)?),
            ("output", "dir") => out_dir = PathBuf::from(value),
            _ => return Err(err(format!("unknown key `{key}` in [{sec}]"))),
        }
    }
    let missing = |what: &str| Error::Parse {
        line: last_line,
        message: format!("missing `{what}` in [experiment]"),
    };
    let query = query.ok_or_else(|| missing("query"))?;
    let j: usize = j.ok_or_else(|| missing("j"))?;
    let n = match n {
        Some(n) => n,
        None => min_inner_radius(j)
            .map_err(|e| Error::Parse {
                line: last_line,
                message: e.to_string(),
            })?
            .max(4),
    };
    let schedule = schedule.unwrap_or_else(|| DEFAULT_DOUBLINGS.map(|k| n << k).collect());
    let cfg = ExperimentConfig {
        query,
        j,
        n,
        schedule,
        samples,
        seed,
        workers,
        out_dir,
        p_override,
    };
    cfg.validate(last_line)?;
    Ok(cfg)
}

pub const CSV_HEADER: &str = "query,j,n,N,samples,hits,p_hat,stderr,seed,stream";

#[derive(Serialize)]
struct FitFile<'a> {
    alpha_hat: f64,
    ci_low: f64,
    ci_high: f64,
    points: &'a [crate::estimate::FitPoint],
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> Error + '_ {
    move |source| Error::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Writes `results.csv`, `fit.json` and `plot.dat` into `dir` and returns
/// the fit.
pub fn write_outputs(dir: &Path, records: &[EstimateRecord]) -> Result<ExponentFit> {
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    let mut csv = String::from(CSV_HEADER);
    csv.push('\n');
    let mut plot = String::from("# log_N log_p stderr_log_p\n");
    for r in records {
        let q = &r.query;
        let _ = writeln!(
            csv,
            "{},{},{},{},{},{},{},{},{},{}",
            q.sigma_class.name(),
            q.j,
            q.n,
            q.outer,
            r.samples,
            r.hits,
            r.p_hat,
            r.stderr,
            r.seed.seed,
            r.seed.stream
        );
        let (lp, sl) = if r.hits == 0 {
            (f64::NAN, f64::NAN)
        } else {
            (r.p_hat.ln(), r.stderr / r.p_hat)
        };
        let _ = writeln!(plot, "{} {} {}", (q.outer as f64).ln(), lp, sl);
    }
    let csv_path = dir.join("results.csv");
    fs::write(&csv_path, csv).map_err(io_err(&csv_path))?;
    let plot_path = dir.join("plot.dat");
    fs::write(&plot_path, plot).map_err(io_err(&plot_path))?;
    let fit = fit_exponent(records)?;
    let json = serde_json::to_string_pretty(&FitFile {
        alpha_hat: fit.alpha_hat,
        ci_low: fit.ci_low,
        ci_high: fit.ci_high,
        points: &fit.points,
    })
    .expect("plain numbers serialize");
    let fit_path = dir.join("fit.json");
    fs::write(&fit_path, json + "\n").map_err(io_err(&fit_path))?;
    Ok(fit)
}

/// Estimates every schedule point and writes the output files.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<(Vec<EstimateRecord>, ExponentFit)> {
    cfg.validate(0)?;
    let records = estimate_schedule(
        cfg.j,
        cfg.query,
        cfg.n,
        &cfg.schedule,
        cfg.samples,
        SeedSpec::new(cfg.seed, 0),
        &cfg.sampling(),
    )?;
    let fit = write_outputs(&cfg.out_dir, &records)?;
    Ok((records, fit))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum VerifyLevel {
    Fast,
    Full,
}

impl std::str::FromStr for VerifyLevel {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "fast" => Ok(VerifyLevel::Fast),
            "full" => Ok(VerifyLevel::Full),
            _ => Err(Error::domain(format!("verification level must be fast or full, got `{s}`"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SuiteResult {
    pub name: &'static str,
    pub instances: u64,
    pub violations: u64,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct VerifyReport {
    pub suites: Vec<SuiteResult>,
}

impl VerifyReport {
    pub fn passed(&self) -> bool {
        self.suites.iter().all(|s| s.violations == 0)
    }

    /// One tab-separated line per suite: name, instances, violations, status.
    pub fn to_text(&self) -> String {
        self.suites
            .iter()
            .map(|s| {
                let status = if s.violations == 0 { "pass" } else { "fail" };
                format!("{}\t{}\t{}\t{status}\n", s.name, s.instances, s.violations)
            })
            .collect()
    }
}

/// Deliberate faults for checking that the suite notices them.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct Faults {
    /// Report one arm more than the flow finds.
    pub inflate_flow: bool,
}

pub fn run_verification_suite(level: VerifyLevel) -> Result<VerifyReport> {
    run_verification_suite_with(level, Faults::default())
}

pub fn run_verification_suite_with(level: VerifyLevel, faults: Faults) -> Result<VerifyReport> {
    let full = level == VerifyLevel::Full;
    let mut report = VerifyReport::default();
    report.suites.push(duality_suite(if full { 10_000 } else { 1_000 }, faults)?);
    report.suites.push(reimer_suite(full)?);
    report.suites.push(surgery_suite(if full { 100 } else { 10 })?);
    report.suites.push(winding_suite(if full { 1_000 } else { 100 })?);
    report.suites.push(fkg_suite()?);
    Ok(report)
}

fn duality_suite(configs: u64, faults: Faults) -> Result<SuiteResult> {
    let annuli: Vec<Annulus> = [(4, 8), (4, 12), (5, 16), (7, 24)]
        .iter()
        .map(|&(n, m)| Annulus::new(n, m))
        .collect::<Result<_>>()?;
    let mut violations = 0;
    for i in 0..configs {
        let a = &annuli[(i % annuli.len() as u64) as usize];
        let p = 0.3 + 0.6 * ((i * 7919) % 1000) as f64 / 1000.0;
        let c = sample_config(a, p, SeedSpec::new(0x5eed, i))?;
        let arms = max_disjoint_arms(&c, Color::Black) + faults.inflate_flow as usize;
        let circ = min_black_on_circuit(&c).unwrap_or(0);
        violations += (1..=5).filter(|&j| (arms >= j) != (circ >= j)).count() as u64;
    }
    Ok(SuiteResult {
        name: "menger_duality",
        instances: configs * 5,
        violations,
    })
}

fn reimer_suite(full: bool) -> Result<SuiteResult> {
    let (mut instances, mut violations) = (0, 0);
    let mut record = |a: &CubeEvent, b: &CubeEvent| -> Result<()> {
        instances += 1;
        violations += !check_reimer(a, b)?.holds as u64;
        Ok(())
    };
    if full {
        let events: Vec<CubeEvent> = (0..256u32).map(|m| CubeEvent::from_fn(3, |w| m >> w & 1 == 1)).collect::<Result<_>>()?;
        for a in &events {
            for b in &events {
                record(a, b)?;
            }
        }
    }
    use rand::Rng;
    let mut rng = PhiloxRng::new(SeedSpec::new(0x5eed, 1));
    let pairs = if full { 10_000 } else { 2_000 };
    for n in 4..=6 {
        for _ in 0..pairs {
            let (da, db) = (rng.gen::<f64>(), rng.gen::<f64>());
            let a = CubeEvent::from_fn(n, |_| rng.gen::<f64>() < da)?;
            let b = CubeEvent::from_fn(n, |_| rng.gen::<f64>() < db)?;
            record(&a, &b)?;
        }
    }
    Ok(SuiteResult {
        name: "reimer",
        instances,
        violations,
    })
}

fn surgery_suite(per_j: u64) -> Result<SuiteResult> {
    let (mut instances, mut violations) = (0, 0);
    for j in 1..=3 {
        for i in 0..per_j {
            instances += 2;
            let inst = synthetic_reroute_instance(j, SeedSpec::new(0x5eed, i))?;
            let ok = reroute(&inst).is_ok_and(|out| check_reroute(&inst, &out).is_empty());
            violations += !ok as u64;
            let (n, outer, lambdas, primes) = synthetic_winding_families(j, SeedSpec::new(0x5eee, i))?;
            let ok = increase_winding(n, outer, &lambdas, &primes).is_ok_and(|fams| {
                fams.len() == j
                    && (0..j).all(|k| {
                        let gain = fams[j - 1][k].winding() - lambdas[k].winding();
                        (gain - 2.0 * std::f64::consts::PI).abs() < 1e-6
                    })
            });
            violations += !ok as u64;
        }
    }
    Ok(SuiteResult {
        name: "surgery",
        instances,
        violations,
    })
}

fn winding_suite(configs: u64) -> Result<SuiteResult> {
    let a = Annulus::new(1, 3)?;
    let (mut instances, mut violations) = (0, 0);
    for i in 0..configs {
        let c = sample_config(&a, 0.6, SeedSpec::new(0x5eed, 2).offset(i))?;
        let sheets = single_arm_winding_sheets(&c, Color::Black, 16.0 * std::f64::consts::PI)?;
        for arm in enumerate_simple_arms(&c, Color::Black, 1 << 20)? {
            instances += 1;
            violations += !sheets.contains(&(arm.sheet() as i32)) as u64;
        }
    }
    Ok(SuiteResult {
        name: "winding_containment",
        instances,
        violations,
    })
}

fn fkg_suite() -> Result<SuiteResult> {
    let mut violations = 0;
    let cases = [(1, 0, 2), (2, 0, 2), (2, 1, 2), (2, 2, 3), (3, 2, 3)];
    for &(j, n, outer) in &cases {
        violations += !fkg_exact(j, n, outer)?.holds() as u64;
    }
    Ok(SuiteResult {
        name: "fkg_exact",
        instances: cases.len() as u64,
        violations,
    })
}
