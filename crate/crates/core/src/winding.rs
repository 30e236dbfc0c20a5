//! Winding angles of lattice paths and the reachable winding classes of
//! single arms.
//!
//! Sheets refer to the cover of the annulus cut along the positive real ray.
//! A site `v` on sheet `k` carries the lifted argument `phi(v) + 2 pi k`, with
//! `phi` in `[0, 2 pi)`. A walk from `a` on sheet 0 to `b` on sheet `k`
//! therefore has winding exactly `phi(b) - phi(a) + 2 pi k`.

use std::collections::{BTreeSet, VecDeque};
use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::arms::ArmSolver;
use crate::error::{Error, Result};
use crate::lattice::{angle_step, crosses_cut, cut_argument, site_argument, Annulus, Site};
use crate::sample::{Color, Coloring, LazyConfig, SeedSpec};

const TWO_PI: f64 = 2.0 * PI;

/// A nearest-neighbour path avoiding the origin, with its cumulative argument.
#[derive(Clone, Debug, PartialEq)]
pub struct LatticePath {
    sites: Vec<Site>,
    /// Continuous determination of the argument at each site.
    arguments: Vec<f64>,
    simple: bool,
}

impl LatticePath {
    pub fn new(sites: Vec<Site>) -> Result<Self> {
        let Some(&first) = sites.first() else {
            return Err(Error::domain("a path needs at least one site"));
        };
        let mut arguments = Vec::with_capacity(sites.len());
        arguments.push(site_argument(first)?);
        for w in sites.windows(2) {
            if w[1] == Site::ORIGIN {
                return Err(Error::domain("path passes through the origin"));
            }
            if !w[0].is_adjacent(w[1]) {
                return Err(Error::domain(format!("{} and {} are not adjacent", w[0], w[1])));
            }
            arguments.push(arguments.last().unwrap() + angle_step(w[0], w[1]));
        }
        let mut seen = std::collections::HashSet::with_capacity(sites.len());
        let simple = sites.iter().all(|s| seen.insert(*s));
        Ok(LatticePath {
            sites,
            arguments,
            simple,
        })
    }

    pub fn from_indices(annulus: &Annulus, indices: &[usize]) -> Result<Self> {
        LatticePath::new(indices.iter().map(|&i| annulus.site(i)).collect())
    }

    pub fn sites(&self) -> &[Site] {
        &self.sites
    }

    pub fn arguments(&self) -> &[f64] {
        &self.arguments
    }

    pub fn len(&self) -> usize {
        self.sites.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sites.is_empty()
    }

    pub fn is_simple(&self) -> bool {
        self.simple
    }

    pub fn reversed(&self) -> LatticePath {
        let mut sites = self.sites.clone();
        sites.reverse();
        LatticePath::new(sites).expect("reversal of a valid path")
    }

    pub fn winding(&self) -> f64 {
        self.arguments.last().unwrap() - self.arguments[0]
    }

    /// Winding class of the path: the sheet its end reaches from sheet 0.
    pub fn sheet(&self) -> i64 {
        let (a, b) = (self.sites[0], *self.sites.last().unwrap());
        ((self.winding() - (cut_argument(b) - cut_argument(a))) / TWO_PI).round() as i64
    }
}

/// Total algebraic variation of the argument along the path.
pub fn winding_angle(p: &LatticePath) -> f64 {
    p.winding()
}

#[inline]
pub(crate) fn sheet_shift(a: Site, b: Site) -> i32 {
    if !crosses_cut(a, b) {
        0
    } else if a.r < 0 {
        // Counterclockwise, from just below the ray onto it.
        1
    } else {
        -1
    }
}

/// Most sheets a single search tracks on each side of sheet 0.
pub const MAX_SHEETS: u32 = 31;

/// Sheets `k` in `[-K, K]`, `K = theta_max / 2 pi`, such that an outer-boundary
/// site of `color` on sheet `k` is reachable through sites of `color` from an
/// inner-boundary site on sheet 0.
pub fn single_arm_winding_sheets<C: Coloring>(c: &C, color: Color, theta_max: f64) -> Result<BTreeSet<i32>> {
    let turns = theta_max / TWO_PI;
    if !(turns >= 0.5) || (turns - turns.round()).abs() > 1e-9 {
        return Err(Error::domain(format!("theta_max = {theta_max} is not a positive multiple of 2 pi")));
    }
    let k_max = turns.round() as u32;
    if k_max > MAX_SHEETS {
        return Err(Error::Capacity(format!("{k_max} sheets per side, at most {MAX_SHEETS} supported")));
    }
    let k_max = k_max as i32;
    let a = c.annulus();
    let mut seen = vec![0u64; a.len()];
    let mut queue = VecDeque::new();
    let mut sheets = BTreeSet::new();
    let bit = |k: i32| 1u64 << (k + k_max);
    for &s in a.inner_boundary() {
        let s = s as usize;
        if c.has_color(s, color) {
            seen[s] |= bit(0);
            queue.push_back((s, 0));
        }
    }
    while let Some((v, k)) = queue.pop_front() {
        if a.is_outer(v) {
            sheets.insert(k);
        }
        let sv = a.site(v);
        for t in a.neighbor_indices(v) {
            if !c.has_color(t, color) {
                continue;
            }
            let kt = k + sheet_shift(sv, a.site(t));
            if kt.abs() > k_max || seen[t] & bit(kt) != 0 {
                continue;
            }
            seen[t] |= bit(kt);
            queue.push_back((t, kt));
        }
    }
    Ok(sheets)
}

/// The completion of a set of winding angles: the union of the windows
/// `(alpha - pi, alpha + pi]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WindingSetEstimate {
    /// Sorted, without duplicates.
    pub angles: Vec<f64>,
    /// Disjoint half-open components `(lo, hi]`, increasing.
    pub components: Vec<(f64, f64)>,
}

impl WindingSetEstimate {
    pub fn is_interval(&self) -> bool {
        self.components.len() == 1
    }

    pub fn length(&self) -> f64 {
        self.components.iter().map(|(lo, hi)| hi - lo).sum()
    }

    pub fn contains(&self, x: f64) -> bool {
        self.components.iter().any(|&(lo, hi)| lo < x && x <= hi)
    }
}

/// Windows of consecutive angles merge when the angles are at most `2 pi`
/// apart (up to `1e-9`): then one window ends where the next begins.
pub fn complete_interval(angles: &[f64]) -> WindingSetEstimate {
    let mut sorted: Vec<f64> = angles.to_vec();
    sorted.sort_by(f64::total_cmp);
    sorted.dedup();
    let mut components: Vec<(f64, f64)> = Vec::new();
    for &a in &sorted {
        match components.last_mut() {
            Some(last) if a - PI <= last.1 + 1e-9 => last.1 = a + PI,
            _ => components.push((a - PI, a + PI)),
        }
    }
    WindingSetEstimate {
        angles: sorted,
        components,
    }
}

/// Every simple path of `color` from the inner to the outer boundary that
/// meets the outer boundary only at its end. Fails once more than `limit`
/// paths exist.
pub fn enumerate_simple_arms<C: Coloring>(c: &C, color: Color, limit: usize) -> Result<Vec<LatticePath>> {
    let a = c.annulus();
    let mut out = Vec::new();
    let mut on = vec![false; a.len()];
    let mut path = Vec::new();
    fn walk<C: Coloring>(
        c: &C,
        color: Color,
        v: usize,
        on: &mut Vec<bool>,
        path: &mut Vec<usize>,
        out: &mut Vec<Vec<usize>>,
        limit: usize,
    ) -> bool {
        let a = c.annulus();
        if a.is_outer(v) {
            out.push(path.clone());
            return out.len() <= limit;
        }
        for t in a.neighbor_indices(v) {
            if on[t] || !c.has_color(t, color) {
                continue;
            }
            on[t] = true;
            path.push(t);
            let ok = walk(c, color, t, on, path, out, limit);
            path.pop();
            on[t] = false;
            if !ok {
                return false;
            }
        }
        true
    }
    let mut raw = Vec::new();
    for &s in a.inner_boundary() {
        let s = s as usize;
        if !c.has_color(s, color) {
            continue;
        }
        on[s] = true;
        path.push(s);
        let ok = walk(c, color, s, &mut on, &mut path, &mut raw, limit);
        path.pop();
        on[s] = false;
        if !ok {
            return Err(Error::Capacity(format!("more than {limit} simple arms")));
        }
    }
    for p in raw {
        out.push(LatticePath::from_indices(a, &p)?);
    }
    Ok(out)
}

/// Winding angles of all arms in all families of `j - 1` disjoint black arms
/// and one white arm, by exhaustive enumeration (small annuli, at most 64 sites).
pub fn poly_family_windings<C: Coloring>(c: &C, j: usize, limit: usize) -> Result<Vec<f64>> {
    let a = c.annulus();
    if j < 2 {
        return Err(Error::domain("families need j >= 2"));
    }
    if a.len() > 64 {
        return Err(Error::Capacity(format!("{} sites, enumeration allows 64", a.len())));
    }
    let white = enumerate_simple_arms(c, Color::White, limit)?;
    if white.is_empty() {
        return Ok(Vec::new());
    }
    let black = enumerate_simple_arms(c, Color::Black, limit)?;
    let mask = |p: &LatticePath| p.sites().iter().fold(0u64, |m, s| m | 1 << a.index_of(*s).unwrap());
    let masks: Vec<u64> = black.iter().map(mask).collect();
    // Can `need` more pairwise disjoint arms avoid `used`?
    fn pack(masks: &[u64], used: u64, need: usize) -> bool {
        if need == 0 {
            return true;
        }
        masks
            .iter()
            .enumerate()
            .any(|(i, &m)| m & used == 0 && pack(&masks[i + 1..], used | m, need - 1))
    }
    let mut out: Vec<f64> = Vec::new();
    let mut any_family = false;
    for (p, &m) in black.iter().zip(&masks) {
        if pack(&masks, m, j - 2) {
            any_family = true;
            out.push(p.winding());
        }
    }
    if !any_family {
        return Ok(Vec::new());
    }
    out.extend(white.iter().map(LatticePath::winding));
    Ok(out)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GrowthPoint {
    pub ratio: u32,
    pub samples_with_arm: u64,
    pub mean_sheets: f64,
    pub stderr: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GrowthReport {
    pub points: Vec<GrowthPoint>,
    /// Weighted regression slope of the mean sheet count on `ln(N/n)`.
    pub slope: f64,
    pub slope_stderr: f64,
    pub positive: bool,
}

/// Mean number of reachable sheets of a single black arm, over samples that
/// contain one, for each outer radius `n * ratio`.
pub fn sheet_growth(n: u32, ratios: &[u32], samples: u64, theta_max: f64, seed: SeedSpec) -> Result<GrowthReport> {
    let mut points = Vec::new();
    for (k, &ratio) in ratios.iter().enumerate() {
        let a = Annulus::new(n, n * ratio)?;
        let mut lazy = LazyConfig::new(&a, 0.5, seed)?;
        let mut solver = ArmSolver::new(&a);
        let (mut count, mut sum, mut sum_sq) = (0u64, 0.0, 0.0);
        for i in 0..samples {
            lazy.reset(seed.offset(k as u64 * crate::estimate::STREAM_BLOCK + i));
            if !solver.has_one_arm(&lazy, Color::Black) {
                continue;
            }
            let s = single_arm_winding_sheets(&lazy, Color::Black, theta_max)?.len() as f64;
            count += 1;
            sum += s;
            sum_sq += s * s;
        }
        if count < 2 {
            return Err(Error::domain(format!("too few samples with an arm at N/n = {ratio}")));
        }
        let mean = sum / count as f64;
        let var = (sum_sq - sum * mean) / (count - 1) as f64;
        points.push(GrowthPoint {
            ratio,
            samples_with_arm: count,
            mean_sheets: mean,
            stderr: (var / count as f64).sqrt().max(1e-12),
        });
    }
    let (slope, slope_stderr) = weighted_slope(
        &points.iter().map(|p| (p.ratio as f64).ln()).collect::<Vec<_>>(),
        &points.iter().map(|p| p.mean_sheets).collect::<Vec<_>>(),
        &points.iter().map(|p| p.stderr).collect::<Vec<_>>(),
    )?;
    Ok(GrowthReport {
        positive: slope - 1.959_963_984_540_054 * slope_stderr > 0.0,
        points,
        slope,
        slope_stderr,
    })
}

/// Weighted least-squares slope and its standard error (scaled by the
/// reduced chi-square when that exceeds 1).
pub(crate) fn weighted_slope(xs: &[f64], ys: &[f64], sig: &[f64]) -> Result<(f64, f64)> {
    if xs.len() < 3 {
        return Err(Error::domain("a slope needs at least 3 points"));
    }
    let (mut s, mut sx, mut sy, mut sxx, mut sxy) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for ((&x, &y), &sg) in xs.iter().zip(ys).zip(sig) {
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
    let chi2: f64 = xs
        .iter()
        .zip(ys)
        .zip(sig)
        .map(|((&x, &y), &sg)| ((y - intercept - slope * x) / sg).powi(2))
        .sum();
    let chi2_red = chi2 / (xs.len() - 2) as f64;
    Ok((slope, (s / det * chi2_red.max(1.0)).sqrt()))
}
