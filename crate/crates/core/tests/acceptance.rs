//! The acceptance criteria, one test each. Every test prints a single
//! `criterion <k> <name>: PASS|FAIL (<details>)` line to stderr, outside the
//! harness capture, and then asserts the criterion.

mod common;

use std::f64::consts::PI;
use std::io::Write;

use common::{sheet_of, simple_crossings};
use percolab::arms::{max_disjoint_arms, min_black_on_circuit, SigmaClass};
use percolab::boolcube::{check_reimer, CubeEvent};
use percolab::estimate::{estimate_schedule, fit_exponent, fkg_exact, quasi_mult_check, ExponentFit, SamplingOptions};
use percolab::lattice::build_annulus;
use percolab::sample::{sample_config, Color, PhiloxRng, SeedSpec};
use percolab::surgery::{
    check_reroute, increase_winding, reroute, spiral_growth, synthetic_reroute_instance, synthetic_winding_families, ANGULAR_QUANTUM,
};
use percolab::winding::single_arm_winding_sheets;
use rand::Rng;

const TWO_PI: f64 = 2.0 * PI;

fn report(k: u32, name: &str, pass: bool, details: String) {
    let status = if pass { "PASS" } else { "FAIL" };
    let _ = writeln!(std::io::stderr(), "criterion {k:>2} {name}: {status} ({details})");
    assert!(pass, "criterion {k} {name} failed: {details}");
}

fn opts() -> SamplingOptions {
    SamplingOptions {
        workers: std::thread::available_parallelism().map_or(1, |n| n.get()),
        p: 0.5,
    }
}

fn fit(j: usize, class: SigmaClass, schedule: &[u32], samples: u64, seed: u64) -> ExponentFit {
    let records = estimate_schedule(j, class, 4, schedule, samples, SeedSpec::new(seed, 0), &opts()).unwrap();
    fit_exponent(&records).unwrap()
}

fn describe(f: &ExponentFit) -> String {
    let pts: Vec<String> = f.points.iter().map(|p| format!("{}:{:.4}", p.outer, p.p_hat)).collect();
    format!(
        "alpha_hat {:.4}, ci95 ({:.4}, {:.4}), chi2_red {:.2}, p_hat [{}]",
        f.alpha_hat,
        f.ci_low,
        f.ci_high,
        f.chi2_red,
        pts.join(" ")
    )
}

#[test]
fn criterion_01_one_arm_exponent() {
    let f = fit(1, SigmaClass::OneBlack, &[32, 64, 128, 256, 512], 100_000, 101);
    let target = 5.0 / 48.0;
    report(1, "one-arm exponent", (f.alpha_hat - target).abs() <= 0.025, format!("target {target:.4} +- 0.025, {}", describe(&f)));
}

#[test]
fn criterion_02_polychromatic_two_arm() {
    let f = fit(2, SigmaClass::PolyOneWhite, &[32, 64, 128, 256, 512], 100_000, 102);
    report(2, "polychromatic 2-arm exponent", (f.alpha_hat - 0.25).abs() <= 0.04, format!("target 0.25 +- 0.04, {}", describe(&f)));
}

#[test]
fn criterion_03_polychromatic_three_arm() {
    let f = fit(3, SigmaClass::PolyOneWhite, &[32, 64, 128, 256], 200_000, 103);
    let target = 8.0 / 12.0;
    report(3, "polychromatic 3-arm exponent", (f.alpha_hat - target).abs() <= 0.08, format!("target {target:.4} +- 0.08, {}", describe(&f)));
}

#[test]
fn criterion_04_strict_ordering() {
    let f = fit(2, SigmaClass::Mono, &[32, 64, 128, 256], 100_000, 104);
    let (lo, hi) = (0.25, 8.0 / 12.0);
    report(4, "strict ordering of mono 2-arm", lo < f.ci_low && f.ci_high < hi, format!("ci must lie in ({lo}, {hi:.4}), {}", describe(&f)));
}

#[test]
fn criterion_05_menger_duality() {
    let annuli: Vec<_> = [(0, 6), (2, 10), (4, 12), (5, 16), (6, 20), (8, 24)].iter().map(|&(n, m)| build_annulus(n, m).unwrap()).collect();
    let (mut checks, mut violations) = (0u64, 0u64);
    for i in 0..10_000u64 {
        let a = &annuli[(i % annuli.len() as u64) as usize];
        let p = 0.3 + 0.65 * ((i * 6151) % 1000) as f64 / 1000.0;
        let c = sample_config(a, p, SeedSpec::new(105, i)).unwrap();
        let arms = max_disjoint_arms(&c, Color::Black);
        let circuit = min_black_on_circuit(&c).expect("annulus has circuits");
        for j in 1..=5 {
            checks += 1;
            violations += ((arms >= j) != (circuit >= j)) as u64;
        }
    }
    report(5, "Menger duality", violations == 0, format!("{checks} checks over 10000 configurations, {violations} violations"));
}

#[test]
fn criterion_06_reimer() {
    let (mut pairs, mut violations) = (0u64, 0u64);
    let cube3: Vec<CubeEvent> = (0..256u32).map(|m| CubeEvent::from_fn(3, |w| m >> w & 1 == 1).unwrap()).collect();
    for a in &cube3 {
        for b in &cube3 {
            pairs += 1;
            violations += !check_reimer(a, b).unwrap().holds as u64;
        }
    }
    let mut rng = PhiloxRng::new(SeedSpec::new(106, 0));
    for n in 4..=6 {
        for _ in 0..100_000 {
            let (da, db) = (rng.gen::<f64>(), rng.gen::<f64>());
            let a = CubeEvent::from_fn(n, |_| rng.gen::<f64>() < da).unwrap();
            let b = CubeEvent::from_fn(n, |_| rng.gen::<f64>() < db).unwrap();
            pairs += 1;
            violations += !check_reimer(&a, &b).unwrap().holds as u64;
        }
    }
    report(6, "Reimer inequality", violations == 0, format!("{pairs} pairs (65536 exhaustive at n = 3), {violations} violations"));
}

#[test]
fn criterion_07_quasi_multiplicativity() {
    let r = quasi_mult_check(2, SigmaClass::Mono, 4, 16, 64, 100_000, SeedSpec::new(107, 0), &opts()).unwrap();
    report(
        7,
        "quasi-multiplicativity upper bound",
        r.rho <= 1.0 + 3.0 * r.stderr,
        format!("rho {:.4}, stderr {:.4}, C1 estimate {:.4}", r.rho, r.stderr, r.c1_estimate),
    );
}

#[test]
fn criterion_08_surgery() {
    let mut problems = Vec::new();
    let mut worst = 0.0f64;
    for j in 1..=3 {
        for i in 0..100u64 {
            let inst = synthetic_reroute_instance(j, SeedSpec::new(108, i)).unwrap();
            match reroute(&inst) {
                Ok(out) => problems.extend(check_reroute(&inst, &out).into_iter().map(|b| format!("j={j} #{i}: {b}"))),
                Err(e) => problems.push(format!("j={j} #{i}: {e}")),
            }
            let (n, outer, lambdas, primes) = synthetic_winding_families(j, SeedSpec::new(1108, i)).unwrap();
            match increase_winding(n, outer, &lambdas, &primes) {
                Ok(fams) if fams.len() == j => {
                    for k in 0..j {
                        let off = fams[j - 1][k].winding() - lambdas[k].winding() - TWO_PI;
                        worst = worst.max(off.abs());
                        if off.abs() > ANGULAR_QUANTUM {
                            problems.push(format!("j={j} #{i} path {k}: gained 2pi{off:+.4}"));
                        }
                    }
                }
                Ok(fams) => problems.push(format!("j={j} #{i}: {} steps", fams.len())),
                Err(e) => problems.push(format!("j={j} #{i}: {e}")),
            }
        }
    }
    report(
        8,
        "surgery properties",
        problems.is_empty(),
        format!("300 reroutes and 300 iterations, largest deviation from 2pi {worst:.2e}, {} problems {:?}", problems.len(), problems.iter().take(3).collect::<Vec<_>>()),
    );
}

#[test]
fn criterion_09_spiral_growth() {
    let g = spiral_growth(2, &[4, 16, 64, 256], 1, 0.5, 1000, 1, SeedSpec::new(109, 0)).unwrap();
    let pts: Vec<String> = g.points.iter().map(|p| format!("{}:{:.4}+-{:.4}", p.ratio, p.mean_count, p.stderr)).collect();
    report(
        9,
        "spiral growth",
        g.positive,
        format!("n 2, j 1, 1000 samples per ratio, slope {:.4} +- {:.4}, means [{}]", g.slope, g.slope_stderr, pts.join(" ")),
    );
}

#[test]
fn criterion_10_fkg_exact() {
    let mut lines = Vec::new();
    let mut ok = true;
    for (j, n, outer) in [(1, 0, 2), (2, 0, 2), (3, 0, 2), (2, 1, 2), (2, 2, 3), (3, 2, 3)] {
        let e = fkg_exact(j, n, outer).unwrap();
        ok &= e.holds();
        lines.push(format!("j{j} S({n},{outer}): {}*{} <= {}*{}", e.joint, e.configurations, e.mono, e.white));
    }
    report(10, "FKG exact check", ok, lines.join(", "));
}

#[test]
fn criterion_11_winding_containment() {
    let annuli: Vec<_> = [(1, 3), (0, 2), (2, 3)].iter().map(|&(n, m)| build_annulus(n, m).unwrap()).collect();
    assert!(annuli.iter().all(|a| a.len() <= 30));
    let (mut crossings, mut violations) = (0usize, 0usize);
    for i in 0..1000u64 {
        let a = &annuli[(i % 3) as usize];
        let p = 0.35 + 0.4 * ((i * 37) % 100) as f64 / 100.0;
        let c = sample_config(a, p, SeedSpec::new(111, i)).unwrap();
        for color in [Color::Black, Color::White] {
            let sheets = single_arm_winding_sheets(&c, color, 8.0 * TWO_PI).unwrap();
            let found = simple_crossings(&c, color);
            crossings += found.len();
            violations += found.iter().filter(|&&x| !sheets.contains(&sheet_of(a, x))).count();
        }
    }
    report(11, "winding oracle containment", violations == 0, format!("1000 configurations, {crossings} simple crossings, {violations} violations"));
}
