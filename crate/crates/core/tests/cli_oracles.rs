use std::process::Command;

use percolab::arms::{ArmQuery, SigmaClass};
use percolab::cli::*;
use percolab::estimate::EstimateRecord;
use percolab::sample::SeedSpec;
use percolab::Error;
use proptest::prelude::*;

fn small_config(dir: &std::path::Path) -> String {
    format!(
        "[experiment]\nquery = one_black\nj = 1\nn = 4\nN = 8, 12, 16\n\n[sampling]\nsamples = 400\nseed = 11\nworkers = 3\n\n[output]\ndir = {}\n",
        dir.display()
    )
}

#[test]
fn minimal_config_gets_defaults() {
    let cfg = parse_config("[experiment]\nquery = mono\nj = 2\n").unwrap();
    assert_eq!(cfg.query, SigmaClass::Mono);
    assert_eq!((cfg.j, cfg.n, cfg.samples, cfg.workers, cfg.seed), (2, 4, 100_000, 1, 0));
    assert_eq!(cfg.schedule, vec![32, 64, 128, 256, 512]);
    assert_eq!(cfg.p_override, None);
}

#[test]
fn bad_configs_name_the_line() {
    let line_of = |text: &str| match parse_config(text) {
        Err(Error::Parse { line, .. }) => line,
        other => panic!("{other:?}"),
    };
    assert_eq!(line_of("[experiment]\nquery = mono\nj = 2\n[sampling]\nsamples = 0\n"), 5);
    assert_eq!(line_of("[experiment]\nquery = mono\ncolour = red\n"), 3);
    assert_eq!(line_of("[experiment]\nquery = mono\nj = two\n"), 3);
    assert_eq!(line_of("query = mono\n"), 1);
    assert_eq!(line_of("[experiment]\nquery = mono\nj = 2\n\n[plots]\n"), 5);
    assert_eq!(line_of("[experiment]\nquery = mono\nj = 2\nN = 64 32 128\n"), 4);
    assert_eq!(line_of("[experiment]\nquery = poly_one_white\nj = 1\n"), 3);
}

#[test]
fn identical_runs_write_identical_files() {
    let tmp = tempfile::tempdir().unwrap();
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    let mut ca = parse_config(&small_config(&a)).unwrap();
    run_experiment(&ca).unwrap();
    ca.out_dir = b.clone();
    ca.workers = 1;
    run_experiment(&ca).unwrap();
    for f in ["results.csv", "fit.json", "plot.dat"] {
        assert_eq!(std::fs::read(a.join(f)).unwrap(), std::fs::read(b.join(f)).unwrap(), "{f}");
    }
    let csv = std::fs::read_to_string(a.join("results.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("query,j,n,N,samples,hits,p_hat,stderr,seed,stream"));
    let first: Vec<&str> = lines.next().unwrap().split(',').collect();
    assert_eq!(&first[..5], &["one_black", "1", "4", "8", "400"]);
    assert_eq!(csv.lines().count(), 4);
}

#[test]
fn synthetic_power_law_outputs() {
    let tmp = tempfile::tempdir().unwrap();
    let records: Vec<EstimateRecord> = [16u32, 32, 64, 128]
        .iter()
        .map(|&big| {
            let mut r = EstimateRecord::from_counts(ArmQuery::new(2, SigmaClass::Mono, 4, big).unwrap(), 1000, 500, SeedSpec::new(0, 0), 0.0);
            r.p_hat = (big as f64).powf(-0.25);
            r.stderr = 0.01;
            r
        })
        .collect();
    write_outputs(tmp.path(), &records).unwrap();
    let fit: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(tmp.path().join("fit.json")).unwrap()).unwrap();
    assert!((fit["alpha_hat"].as_f64().unwrap() - 0.25).abs() < 1e-9);
    assert_eq!(fit["points"].as_array().unwrap().len(), 4);
    let plot = std::fs::read_to_string(tmp.path().join("plot.dat")).unwrap();
    let rows: Vec<&str> = plot.lines().filter(|l| !l.starts_with('#')).collect();
    assert_eq!(rows.len(), 4);
    assert_eq!(rows[0].split_whitespace().count(), 3);
}

#[test]
fn unwritable_output_is_an_io_error() {
    let tmp = tempfile::tempdir().unwrap();
    let blocker = tmp.path().join("file");
    std::fs::write(&blocker, "x").unwrap();
    let cfg = parse_config(&small_config(&blocker.join("sub"))).unwrap();
    assert!(matches!(run_experiment(&cfg), Err(Error::Io { .. })));
}

#[test]
fn verification_suite_and_negative_control() {
    let ok = run_verification_suite(VerifyLevel::Fast).unwrap();
    assert!(ok.passed(), "{}", ok.to_text());
    assert_eq!(ok.to_text().lines().count(), ok.suites.len());
    let bad = run_verification_suite_with(VerifyLevel::Fast, Faults { inflate_flow: true }).unwrap();
    assert!(!bad.passed());
    let duality = bad.suites.iter().find(|s| s.name == "menger_duality").unwrap();
    assert!(duality.violations > 0);
}

#[test]
fn binary_exit_codes_and_seed_override() {
    let exe = env!("CARGO_BIN_EXE_perco");
    let tmp = tempfile::tempdir().unwrap();
    let cfg_path = tmp.path().join("exp.cfg");
    std::fs::write(&cfg_path, small_config(&tmp.path().join("x"))).unwrap();

    let run = |extra: &[&str], env: Option<&str>| {
        let mut cmd = Command::new(exe);
        cmd.args(extra).env_remove("PERCO_SEED");
        if let Some(s) = env {
            cmd.env("PERCO_SEED", s);
        }
        cmd.output().unwrap()
    };
    assert_eq!(run(&["--bogus"], None).status.code(), Some(EXIT_USAGE));
    assert_eq!(run(&["--config", tmp.path().join("none.cfg").to_str().unwrap()], None).status.code(), Some(EXIT_IO));
    let cfg = cfg_path.to_str().unwrap();
    let out_a = tmp.path().join("a");
    let out_b = tmp.path().join("b");
    let o = run(&["--config", cfg, "--out", out_a.to_str().unwrap(), "--seed", "99"], Some("5"));
    assert_eq!(o.status.code(), Some(EXIT_OK), "{}", String::from_utf8_lossy(&o.stderr));
    let o = run(&["--config", cfg, "--out", out_b.to_str().unwrap(), "--workers", "2"], Some("99"));
    assert_eq!(o.status.code(), Some(EXIT_OK));
    let csv = std::fs::read_to_string(out_a.join("results.csv")).unwrap();
    assert!(csv.lines().nth(1).unwrap().ends_with(",99,0"));
    assert_eq!(csv, std::fs::read_to_string(out_b.join("results.csv")).unwrap());
}

fn class() -> impl Strategy<Value = SigmaClass> {
    prop_oneof![
        Just(SigmaClass::Mono),
        Just(SigmaClass::PolyOneWhite),
        Just(SigmaClass::OneBlack),
        Just(SigmaClass::OneWhite)
    ]
}

proptest! {
    #[test]
    fn config_round_trip(
        query in class(),
        j in 2usize..5,
        n in 4u32..10,
        steps in prop::collection::vec(1u32..40, 1..6),
        samples in 1u64..1_000_000,
        seed in any::<u64>(),
        workers in 1usize..16,
        p in prop::option::of(0.0f64..=1.0),
    ) {
        let mut schedule = Vec::new();
        let mut at = n;
        for s in steps {
            at += s;
            schedule.push(at);
        }
        let text = format!(
            "[experiment]\nquery = {}\nj = {j}\nn = {n}\nN = {}\n[sampling]\nsamples = {samples}\nseed = {seed}\nworkers = {workers}\n{}[output]\ndir = results/run\n",
            query.name(),
            schedule.iter().map(u32::to_string).collect::<Vec<_>>().join(","),
            p.map(|p| format!("p = {p}\n")).unwrap_or_default(),
        );
        let cfg = parse_config(&text).unwrap();
        prop_assert_eq!(&parse_config(&cfg.to_text()).unwrap(), &cfg);
    }
}
