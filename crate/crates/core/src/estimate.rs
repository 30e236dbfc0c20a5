//! Monte Carlo estimates of arm-event probabilities and what is built on them:
//! power-law exponent fits, quasi-multiplicativity, the Harris inequality used
//! for polychromatic events, the strict ordering report and a-priori bounds.
//!
//! Sample `i` of an estimate started at stream `s` always uses stream `s + i`,
//! and workers take contiguous ranges of sample indices, so counts do not
//! depend on the number of workers.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::arms::{ArmQuery, ArmSolver, SigmaClass};
use crate::error::{Error, Result};
use crate::lattice::{min_inner_radius, Annulus};
use crate::sample::{Color, LazyConfig, SeedSpec, SiteConfig};

/// Streams reserved for one schedule point; points of a schedule use
/// disjoint blocks so their estimates are independent.
pub const STREAM_BLOCK: u64 = 1 << 40;

const Z95: f64 = 1.959_963_984_540_054;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SamplingOptions {
    pub workers: usize,
    /// Probability that a site is black; 1/2 is the critical point.
    pub p: f64,
}

impl Default for SamplingOptions {
    fn default() -> Self {
        SamplingOptions { workers: 1, p: 0.5 }
    }
}

/// Run `f` on `samples` lazily generated configurations and count how often
/// each outcome in `0..outcomes` occurs.
pub fn tally<F>(
    annulus: &Annulus,
    samples: u64,
    seed: SeedSpec,
    opts: &SamplingOptions,
    outcomes: usize,
    f: F,
) -> Result<Vec<u64>>
where
    F: Fn(&mut ArmSolver, &LazyConfig<'_>) -> usize + Sync,
{
    if samples == 0 {
        return Err(Error::domain("at least one sample is required"));
    }
    // Validates p before any thread starts.
    LazyConfig::new(annulus, opts.p, seed)?;
    let workers = opts.workers.clamp(1, samples.min(1024) as usize);
    let run = |lo: u64, hi: u64| {
        let mut counts = vec![0u64; outcomes];
        let mut solver = ArmSolver::new(annulus);
        let mut config = LazyConfig::new(annulus, opts.p, seed).expect("p validated");
        for i in lo..hi {
            config.reset(seed.offset(i));
            counts[f(&mut solver, &config)] += 1;
        }
        counts
    };
    let bounds: Vec<(u64, u64)> = (0..workers as u64)
        .map(|k| (samples * k / workers as u64, samples * (k + 1) / workers as u64))
        .collect();
    let parts: Vec<Vec<u64>> = if workers == 1 {
        vec![run(0, samples)]
    } else {
        std::thread::scope(|scope| {
            let handles: Vec<_> = bounds.iter().map(|&(lo, hi)| scope.spawn(move || run(lo, hi))).collect();
            handles.into_iter().map(|h| h.join().expect("worker panicked")).collect()
        })
    };
    let mut total = vec![0u64; outcomes];
    for part in parts {
        for (t, c) in total.iter_mut().zip(part) {
            *t += c;
        }
    }
    Ok(total)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EstimateRecord {
    pub query: ArmQuery,
    pub samples: u64,
    pub hits: u64,
    pub p_hat: f64,
    /// Binomial standard error `sqrt(p(1-p)/samples)`.
    pub stderr: f64,
    pub seed: SeedSpec,
    pub wall_time_s: f64,
}

impl EstimateRecord {
    pub fn from_counts(query: ArmQuery, samples: u64, hits: u64, seed: SeedSpec, wall_time_s: f64) -> Self {
        let p_hat = hits as f64 / samples as f64;
        EstimateRecord {
            query,
            samples,
            hits,
            p_hat,
            stderr: (p_hat * (1.0 - p_hat) / samples as f64).sqrt(),
            seed,
            wall_time_s,
        }
    }
}

pub fn estimate_prob(q: &ArmQuery, samples: u64, seed: SeedSpec) -> Result<EstimateRecord> {
    estimate_prob_with(q, samples, seed, &SamplingOptions::default())
}

pub fn estimate_prob_with(q: &ArmQuery, samples: u64, seed: SeedSpec, opts: &SamplingOptions) -> Result<EstimateRecord> {
    q.validate()?;
    let annulus = Annulus::new(q.n, q.outer)?;
    let start = Instant::now();
    let counts = tally(&annulus, samples, seed, opts, 2, |solver, c| solver.detect_unchecked(c, q) as usize)?;
    Ok(EstimateRecord::from_counts(*q, samples, counts[1], seed, start.elapsed().as_secs_f64()))
}

/// One record per outer radius; point `k` uses the stream block `k` after `seed`.
pub fn estimate_schedule(
    j: usize,
    sigma_class: SigmaClass,
    n: u32,
    schedule: &[u32],
    samples: u64,
    seed: SeedSpec,
    opts: &SamplingOptions,
) -> Result<Vec<EstimateRecord>> {
    schedule
        .iter()
        .enumerate()
        .map(|(k, &outer)| {
            let q = ArmQuery::new(j, sigma_class, n, outer)?;
            estimate_prob_with(&q, samples, seed.offset(k as u64 * STREAM_BLOCK), opts)
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitPoint {
    #[serde(rename = "N")]
    pub outer: u32,
    pub p_hat: f64,
    pub stderr: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExponentFit {
    pub j: usize,
    pub sigma_class: SigmaClass,
    pub n: u32,
    pub alpha_hat: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub alpha_stderr: f64,
    /// Fitted `ln p` at `ln N = 0`.
    pub intercept: f64,
    pub chi2_red: f64,
    pub points: Vec<FitPoint>,
    /// Standardised residuals `(ln p - fit) / sigma`, one per point.
    pub residuals: Vec<f64>,
    pub warnings: Vec<String>,
}

impl ExponentFit {
    pub fn ci_contains(&self, x: f64) -> bool {
        self.ci_low <= x && x <= self.ci_high
    }
}

/// Weighted least squares of `ln p` on `ln N`; `p ~ N^(-alpha)`.
///
/// The standard error of `ln p` is `stderr / p`. The slope covariance is the
/// linear-model one, inflated by the reduced chi-square when that exceeds 1.
pub fn fit_exponent(records: &[EstimateRecord]) -> Result<ExponentFit> {
    let Some(first) = records.first() else {
        return Err(Error::domain("no records to fit"));
    };
    let key = (first.query.j, first.query.sigma_class, first.query.n);
    if records.iter().any(|r| (r.query.j, r.query.sigma_class, r.query.n) != key) {
        return Err(Error::domain("records mix arm counts, classes or inner radii"));
    }
    let mut sorted: Vec<&EstimateRecord> = records.iter().collect();
    sorted.sort_by_key(|r| r.query.outer);
    if sorted.windows(2).any(|w| w[0].query.outer == w[1].query.outer) {
        return Err(Error::domain("schedule repeats an outer radius"));
    }
    let mut warnings = Vec::new();
    let mut points = Vec::new();
    for r in sorted {
        if r.hits == 0 {
            warnings.push(format!("N = {}: no hits in {} samples, excluded", r.query.outer, r.samples));
        } else {
            points.push(FitPoint {
                outer: r.query.outer,
                p_hat: r.p_hat,
                // A certain event has zero binomial error; half a sample keeps the weight finite.
                stderr: r.stderr.max(0.5 / r.samples as f64),
            });
        }
    }
    if points.len() < 3 {
        return Err(Error::domain(format!("{} usable records, at least 3 needed", points.len())));
    }
    let xs: Vec<f64> = points.iter().map(|p| (p.outer as f64).ln()).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.p_hat.ln()).collect();
    let sig: Vec<f64> = points.iter().map(|p| p.stderr / p.p_hat).collect();
    let (mut s, mut sx, mut sy, mut sxx, mut sxy) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for ((&x, &y), &sg) in xs.iter().zip(&ys).zip(&sig) {
        let w = 1.0 / (sg * sg);
        s += w;
        sx += w * x;
        sy += w * y;
        sxx += w * x * x;
        sxy += w * x * y;
    }
    let det = s * sxx - sx * sx;
    let slope = (s * sxy - sx * sy) / det;
    let intercept = (sy - slope * sx) / s;
    let residuals: Vec<f64> = xs
        .iter()
        .zip(&ys)
        .zip(&sig)
        .map(|((&x, &y), &sg)| (y - intercept - slope * x) / sg)
        .collect();
    let chi2: f64 = residuals.iter().map(|r| r * r).sum();
    let chi2_red = chi2 / (points.len() - 2) as f64;
    let alpha_stderr = (s / det * chi2_red.max(1.0)).sqrt();
    let alpha_hat = -slope;
    Ok(ExponentFit {
        j: key.0,
        sigma_class: key.1,
        n: key.2,
        alpha_hat,
        ci_low: alpha_hat - Z95 * alpha_stderr,
        ci_high: alpha_hat + Z95 * alpha_stderr,
        alpha_stderr,
        intercept,
        chi2_red,
        points,
        residuals,
        warnings,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuasiMultRecord {
    /// `p(n1, n3) / (p(n1, n2) p(n2, n3))`.
    pub rho: f64,
    pub stderr: f64,
    /// Whether `rho <= 1 + 3 stderr`.
    pub upper_holds: bool,
    /// Empirical lower constant, `min(rho, 1)`.
    pub c1_estimate: f64,
    /// Estimates over `(n1, n3)`, `(n1, n2)` and `(n2, n3)`.
    pub records: [EstimateRecord; 3],
}

#[allow(clippy::too_many_arguments)]
pub fn quasi_mult_check(
    j: usize,
    sigma_class: SigmaClass,
    n1: u32,
    n2: u32,
    n3: u32,
    samples: u64,
    seed: SeedSpec,
    opts: &SamplingOptions,
) -> Result<QuasiMultRecord> {
    if !(n1 < n2 && n2 < n3) {
        return Err(Error::domain(format!("radii {n1}, {n2}, {n3} are not increasing")));
    }
    let est = |k: u64, lo: u32, hi: u32| {
        let q = ArmQuery::new(j, sigma_class, lo, hi)?;
        estimate_prob_with(&q, samples, seed.offset(k * STREAM_BLOCK), opts)
    };
    let whole = est(0, n1, n3)?;
    let inner = est(1, n1, n2)?;
    let outer = est(2, n2, n3)?;
    quasi_mult_from_records(whole, inner, outer)
}

/// Ratio and delta-method error from three independent estimates.
pub fn quasi_mult_from_records(
    whole: EstimateRecord,
    inner: EstimateRecord,
    outer: EstimateRecord,
) -> Result<QuasiMultRecord> {
    if inner.p_hat == 0.0 || outer.p_hat == 0.0 {
        return Err(Error::domain("a sub-annulus estimate is zero"));
    }
    let rho = whole.p_hat / (inner.p_hat * outer.p_hat);
    let rel = |r: &EstimateRecord| if r.p_hat > 0.0 { r.stderr / r.p_hat } else { 0.0 };
    let stderr = rho * (rel(&whole).powi(2) + rel(&inner).powi(2) + rel(&outer).powi(2)).sqrt();
    Ok(QuasiMultRecord {
        rho,
        stderr,
        upper_holds: rho <= 1.0 + 3.0 * stderr,
        c1_estimate: rho.min(1.0),
        records: [whole, inner, outer],
    })
}

/// Exact counts over all configurations of a tiny annulus.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExactFkg {
    pub j: usize,
    pub n: u32,
    #[serde(rename = "N")]
    pub outer: u32,
    pub configurations: u128,
    pub mono: u128,
    pub white: u128,
    pub joint: u128,
}

impl ExactFkg {
    /// `P(mono and white) <= P(mono) P(white)`, compared as integers.
    pub fn holds(&self) -> bool {
        self.joint * self.configurations <= self.mono * self.white
    }
}

/// Enumerate every configuration of `S(n, N)` (at most 20 sites) and count
/// `j` disjoint black arms, a white arm, and both.
pub fn fkg_exact(j: usize, n: u32, outer: u32) -> Result<ExactFkg> {
    ArmQuery::new(j, SigmaClass::Mono, n, outer)?;
    let a = Annulus::new(n, outer)?;
    if a.len() > 20 {
        return Err(Error::Capacity(format!("{} sites; exhaustive enumeration allows 20", a.len())));
    }
    let mut solver = ArmSolver::new(&a);
    let (mut mono, mut white, mut joint) = (0u128, 0u128, 0u128);
    for bits in 0..1u64 << a.len() {
        let c = SiteConfig::from_bits(&a, bits)?;
        let m = solver.disjoint_arms(&c, Color::Black, j) >= j;
        let w = solver.has_one_arm(&c, Color::White);
        mono += m as u128;
        white += w as u128;
        joint += (m && w) as u128;
    }
    Ok(ExactFkg {
        j,
        n,
        outer,
        configurations: 1u128 << a.len(),
        mono,
        white,
        joint,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FkgRecord {
    pub samples: u64,
    pub p_joint: f64,
    pub p_mono: f64,
    pub p_white: f64,
    /// `p_joint - p_mono p_white` and its delta-method standard error.
    pub gap: f64,
    pub gap_stderr: f64,
    pub holds: bool,
    pub exact: Option<ExactFkg>,
}

/// Monte Carlo Harris check for `MONO_j` against `ONE_WHITE` on common
/// samples, plus the exact version on the smallest admissible tiny annulus.
pub fn fkg_check(j: usize, n: u32, outer: u32, samples: u64, seed: SeedSpec, opts: &SamplingOptions) -> Result<FkgRecord> {
    ArmQuery::new(j, SigmaClass::Mono, n, outer)?;
    let a = Annulus::new(n, outer)?;
    let counts = tally(&a, samples, seed, opts, 4, |solver, c| {
        let m = solver.disjoint_arms(c, Color::Black, j) >= j;
        let w = solver.has_one_arm(c, Color::White);
        m as usize | (w as usize) << 1
    })?;
    let s = samples as f64;
    let (p10, p01, p11) = (counts[1] as f64 / s, counts[2] as f64 / s, counts[3] as f64 / s);
    let p_mono = p10 + p11;
    let p_white = p01 + p11;
    let gap = p11 - p_mono * p_white;
    // Gradient of the gap in (p11, p10, p01) and the multinomial covariance.
    let g = [1.0 - p_mono - p_white, -p_white, -p_mono];
    let p = [p11, p10, p01];
    let mut var = 0.0;
    for a in 0..3 {
        for b in 0..3 {
            let cov = if a == b { p[a] * (1.0 - p[a]) } else { -p[a] * p[b] };
            var += g[a] * g[b] * cov;
        }
    }
    let gap_stderr = (var.max(0.0) / s).sqrt();
    let n0 = min_inner_radius(j)?;
    let exact = [(0, 2), (1, 2)]
        .into_iter()
        .find(|&(m, _)| m >= n0)
        .map(|(m, big)| fkg_exact(j, m, big))
        .transpose()?;
    Ok(FkgRecord {
        samples,
        p_joint: p11,
        p_mono,
        p_white,
        gap,
        gap_stderr,
        holds: gap <= 3.0 * gap_stderr,
        exact,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StrictReport {
    pub j: usize,
    /// Fit of `MONO_j`, the exponent whose position is being tested.
    pub mono: ExponentFit,
    /// Fits of `POLY_ONE_WHITE_j` and `POLY_ONE_WHITE_(j+1)`.
    pub lower: ExponentFit,
    pub upper: ExponentFit,
    pub lower_exact: f64,
    pub upper_exact: f64,
    /// Whether the 95% interval of the `MONO_j` exponent lies strictly
    /// between the two exact polychromatic exponents.
    pub strictly_inside: bool,
    pub lower_fit_within: f64,
    pub upper_fit_within: f64,
}

/// Polychromatic `j`-arm exponent `(j^2 - 1) / 12`.
pub fn polychromatic_exponent(j: usize) -> f64 {
    ((j * j) as f64 - 1.0) / 12.0
}

pub fn strict_inequality_report(
    j: usize,
    n: u32,
    schedule: &[u32],
    samples: u64,
    seed: SeedSpec,
    opts: &SamplingOptions,
) -> Result<StrictReport> {
    if j < 2 {
        return Err(Error::domain("the strict ordering needs j >= 2"));
    }
    let fit = |k: usize, class: SigmaClass| -> Result<ExponentFit> {
        fit_exponent(&estimate_schedule(k, class, n, schedule, samples, seed, opts)?)
    };
    strict_report_from_fits(j, fit(j, SigmaClass::Mono)?, fit(j, SigmaClass::PolyOneWhite)?, fit(j + 1, SigmaClass::PolyOneWhite)?)
}

pub fn strict_report_from_fits(j: usize, mono: ExponentFit, lower: ExponentFit, upper: ExponentFit) -> Result<StrictReport> {
    if mono.j != j || lower.j != j || upper.j != j + 1 {
        return Err(Error::domain("fits do not match the arm counts of the report"));
    }
    let lower_exact = polychromatic_exponent(j);
    let upper_exact = polychromatic_exponent(j + 1);
    Ok(StrictReport {
        j,
        strictly_inside: mono.ci_low > lower_exact && mono.ci_high < upper_exact,
        lower_fit_within: (lower.alpha_hat - lower_exact).abs(),
        upper_fit_within: (upper.alpha_hat - upper_exact).abs(),
        mono,
        lower,
        upper,
        lower_exact,
        upper_exact,
    })
}

/// Power-law envelope `p ~ c (n/N)^exponent` read off a fit.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Envelope {
    pub constant: f64,
    pub exponent: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AprioriRecord {
    pub one_black: Vec<EstimateRecord>,
    pub mono: Vec<EstimateRecord>,
    /// Each one-arm estimate exceeds the next by more than 3 combined stderrs.
    pub decreasing: bool,
    pub mono_positive: bool,
    /// Upper envelope `C (n/N)^eps` of the one-arm probability.
    pub one_arm_envelope: Option<Envelope>,
    /// Lower envelope `c_j (n/N)^beta_j` of the `j`-arm probability.
    pub mono_envelope: Option<Envelope>,
    pub passed: bool,
}

pub fn apriori_check(
    j: usize,
    n: u32,
    schedule: &[u32],
    samples: u64,
    seed: SeedSpec,
    opts: &SamplingOptions,
) -> Result<AprioriRecord> {
    if schedule.len() < 3 {
        return Err(Error::domain("a-priori check needs at least 3 schedule points"));
    }
    let one = estimate_schedule(1, SigmaClass::OneBlack, n, schedule, samples, seed, opts)?;
    let mono = estimate_schedule(j, SigmaClass::Mono, n, schedule, samples, seed, opts)?;
    apriori_from_records(one, mono)
}

pub fn apriori_from_records(one_black: Vec<EstimateRecord>, mono: Vec<EstimateRecord>) -> Result<AprioriRecord> {
    let decreasing = one_black.windows(2).all(|w| {
        let gap = w[0].p_hat - w[1].p_hat;
        gap > 3.0 * (w[0].stderr.powi(2) + w[1].stderr.powi(2)).sqrt()
    });
    let mono_positive = mono.iter().all(|r| r.hits > 0);
    let envelope = |records: &[EstimateRecord]| {
        fit_exponent(records).ok().map(|f| Envelope {
            constant: (f.intercept - f.alpha_hat * (f.n.max(1) as f64).ln()).exp(),
            exponent: f.alpha_hat,
        })
    };
    Ok(AprioriRecord {
        one_arm_envelope: envelope(&one_black),
        mono_envelope: envelope(&mono),
        passed: decreasing && mono_positive,
        decreasing,
        mono_positive,
        one_black,
        mono,
    })
}
