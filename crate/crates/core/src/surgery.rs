//! Path surgery: j-spiral witnesses between radii `m` and `4m`, and the
//! rerouting lemma that turns two families of crossings into a third one
//! turning a little further.

use std::collections::{HashMap, HashSet, VecDeque};
use std::f64::consts::PI;
use std::fmt::Write as _;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::arms::{min_weight_circuit, ArmSolver};
use crate::error::{Error, Result};
use crate::lattice::{Annulus, Site};
use crate::estimate::STREAM_BLOCK;
use crate::sample::{Color, Coloring, LazyConfig, PhiloxRng, SeedSpec};
use crate::winding::LatticePath;

const TWO_PI: f64 = 2.0 * PI;
const EPS: f64 = 1e-9;

/// Largest angle between two lattice neighbours seen from the origin, used
/// as slack wherever a continuum angle is compared with a lattice one.
pub const ANGULAR_QUANTUM: f64 = TWO_PI / 6.0;

/// A j-spiral between radii `m` and `4m`: four families of black paths plus
/// the active points of each ray.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SpiralWitness {
    pub m: u32,
    pub j: usize,
    /// Crossings of `S_{m,4m}`, each from its inner to its outer boundary.
    pub rays: Vec<Vec<Site>>,
    /// `spirals[i]` runs inside `S_{2m,3m}` between two sites of `rays[i]`.
    pub spirals: Vec<Vec<Site>>,
    /// Circuits around the hole inside `S_{m,2m}`.
    pub inner_circuits: Vec<Vec<Site>>,
    /// Circuits around the hole inside `S_{3m,4m}`.
    pub outer_circuits: Vec<Vec<Site>>,
    pub inner_active: Vec<Site>,
    pub outer_active: Vec<Site>,
}

#[inline]
fn radius_band(s: Site, lo: u32, hi: u32) -> bool {
    let (lo, hi) = (lo as i64, hi as i64);
    s.norm_sq() > lo * lo && s.norm_sq() <= hi * hi
}

/// Inner and outer active indices of a ray: the site after its last visit to
/// the closed disc of radius `2m`, and the last site before it next leaves
/// the disc of radius `3m`.
pub fn active_indices(ray: &[Site], m: u32) -> Option<(usize, usize)> {
    let (m2, m3) = (2 * m as i64, 3 * m as i64);
    let last_in = ray.iter().rposition(|s| s.norm_sq() <= m2 * m2)?;
    let a = last_in + 1;
    if a >= ray.len() {
        return None;
    }
    let exit = (a..ray.len()).find(|&i| ray[i].norm_sq() > m3 * m3)?;
    if exit == a {
        return None;
    }
    Some((a, exit - 1))
}

fn pairwise_disjoint(paths: &[Vec<Site>]) -> bool {
    let mut seen = HashSet::new();
    paths.iter().flatten().all(|s| seen.insert(*s))
}

fn is_simple_path(p: &[Site]) -> bool {
    let mut seen = HashSet::with_capacity(p.len());
    !p.is_empty() && p.windows(2).all(|w| w[0].is_adjacent(w[1])) && p.iter().all(|s| seen.insert(*s))
}

/// Winding of a closed lattice circuit, or `None` if it is not one.
fn circuit_winding(c: &[Site]) -> Option<f64> {
    if c.len() < 3 || !is_simple_path(c) || !c[0].is_adjacent(*c.last().unwrap()) {
        return None;
    }
    let mut closed = c.to_vec();
    closed.push(c[0]);
    LatticePath::new(closed).ok().map(|p| p.winding())
}

/// Exact check of every invariant of a j-spiral in `c`. Sites outside the
/// annulus of `c` are a domain error; any other violation gives `false`.
pub fn verify_spiral<C: Coloring>(c: &C, w: &SpiralWitness) -> Result<bool> {
    let a = c.annulus();
    let families = [&w.rays, &w.spirals, &w.inner_circuits, &w.outer_circuits];
    for s in families.iter().flat_map(|f| f.iter().flatten()).chain(&w.inner_active).chain(&w.outer_active) {
        if !a.contains(*s) {
            return Err(Error::domain(format!("witness site {s} lies outside the annulus")));
        }
    }
    let m = w.m;
    if m == 0 || w.j == 0 || families.iter().any(|f| f.len() != w.j) || w.inner_active.len() != w.j || w.outer_active.len() != w.j {
        return Ok(false);
    }
    let all_black = families.iter().flat_map(|f| f.iter().flatten()).all(|s| c.is_black(a.index_of(*s).unwrap()));
    if !all_black || !families.iter().all(|f| pairwise_disjoint(f)) {
        return Ok(false);
    }
    let touches = |s: Site, r: u32| s.lattice_neighbors().iter().any(|t| t.in_disc(r));
    let leaves = |s: Site, r: u32| s.lattice_neighbors().iter().any(|t| !t.in_disc(r));
    for (i, ray) in w.rays.iter().enumerate() {
        let ok = is_simple_path(ray)
            && ray.iter().all(|&s| radius_band(s, m, 4 * m))
            && touches(ray[0], m)
            && leaves(*ray.last().unwrap(), 4 * m);
        let Some((lo, hi)) = active_indices(ray, m).filter(|_| ok) else {
            return Ok(false);
        };
        if ray[lo] != w.inner_active[i] || ray[hi] != w.outer_active[i] {
            return Ok(false);
        }
        if !ray[lo..=hi].iter().all(|&s| radius_band(s, 2 * m, 3 * m)) {
            return Ok(false);
        }
        let sp = &w.spirals[i];
        if sp.len() < 2 || !is_simple_path(sp) || !sp.iter().all(|&s| radius_band(s, 2 * m, 3 * m)) {
            return Ok(false);
        }
        let pos = |s: Site| ray.iter().position(|&r| r == s);
        let (Some(x), Some(y)) = (pos(sp[0]), pos(*sp.last().unwrap())) else {
            return Ok(false);
        };
        if !(lo <= x && x < y && y <= hi) || sp[1..sp.len() - 1].iter().any(|s| pos(*s).is_some()) {
            return Ok(false);
        }
        let shortcut = LatticePath::new(ray[x..=y].to_vec())?.winding();
        let turn = LatticePath::new(sp.clone())?.winding() - shortcut;
        if (turn - TWO_PI).abs() > EPS {
            return Ok(false);
        }
    }
    for (family, lo, hi) in [(&w.inner_circuits, m, 2 * m), (&w.outer_circuits, 3 * m, 4 * m)] {
        for circ in family.iter() {
            let around = circuit_winding(circ).is_some_and(|t| (t.abs() - TWO_PI).abs() < EPS);
            if !around || !circ.iter().all(|&s| radius_band(s, lo, hi)) {
                return Ok(false);
            }
        }
    }
    Ok(true)
}

/// A sub-annulus with the index of each of its sites in a host annulus.
struct Band {
    annulus: Annulus,
    host: Vec<u32>,
}

impl Band {
    fn new(host: &Annulus, lo: u32, hi: u32) -> Result<Band> {
        let annulus = Annulus::new(lo, hi)?;
        let host = annulus
            .sites()
            .iter()
            .map(|&s| host.index_of(s).map(|i| i as u32))
            .collect::<Option<Vec<u32>>>()
            .ok_or_else(|| Error::domain(format!("annulus does not cover S_{{{lo},{hi}}}")))?;
        Ok(Band { annulus, host })
    }
}

struct View<'a, C> {
    band: &'a Band,
    host: &'a C,
}

impl<C: Coloring> Coloring for View<'_, C> {
    fn annulus(&self) -> &Annulus {
        &self.band.annulus
    }

    #[inline]
    fn is_black(&self, idx: usize) -> bool {
        self.host.is_black(self.band.host[idx] as usize)
    }
}

/// Up to `count` disjoint black circuits, innermost first, each hugging the
/// outside of everything found so far.
fn nested_circuits<C: Coloring>(c: &C, count: usize) -> Option<Vec<Vec<Site>>> {
    let a = c.annulus();
    let mut used = vec![false; a.len()];
    let mut outside = vec![false; a.len()];
    let mut queue = VecDeque::new();
    let mut out = Vec::with_capacity(count);
    for _ in 0..count {
        // Hole side: everything reachable from the hole through white or used sites.
        outside.iter_mut().for_each(|x| *x = false);
        for &s in a.inner_boundary() {
            let s = s as usize;
            if !c.is_black(s) || used[s] {
                outside[s] = true;
                queue.push_back(s);
            }
        }
        while let Some(v) = queue.pop_front() {
            if a.is_outer(v) {
                return None;
            }
            for t in a.neighbor_indices(v) {
                if !outside[t] && (used[t] || !c.is_black(t)) {
                    outside[t] = true;
                    queue.push_back(t);
                }
            }
        }
        let frontier = |v: usize| {
            !outside[v] && (a.is_inner(v) || a.neighbor_indices(v).any(|t| outside[t]))
        };
        let (_, cycle) = min_weight_circuit(a, |v| frontier(v).then_some(1))?;
        for &v in &cycle {
            used[v] = true;
        }
        out.push(cycle.into_iter().map(|v| a.site(v)).collect());
    }
    Some(out)
}

/// Reusable search state for j-spirals at one scale `m` inside a host annulus.
pub struct SpiralSearcher {
    m: u32,
    inner: Band,
    middle: Band,
    outer: Band,
    whole: Band,
    solver: ArmSolver,
}

impl SpiralSearcher {
    pub fn new(host: &Annulus, m: u32) -> Result<Self> {
        if m == 0 {
            return Err(Error::domain("spiral scale m must be positive"));
        }
        let whole = Band::new(host, m, 4 * m)?;
        Ok(SpiralSearcher {
            m,
            inner: Band::new(host, m, 2 * m)?,
            middle: Band::new(host, 2 * m, 3 * m)?,
            outer: Band::new(host, 3 * m, 4 * m)?,
            solver: ArmSolver::new(&whole.annulus),
            whole,
        })
    }

    pub fn m(&self) -> u32 {
        self.m
    }

    /// Seeded randomized search; anything returned passes [`verify_spiral`].
    /// `budget` bounds the number of orders in which spirals are attempted.
    pub fn find<C: Coloring>(&mut self, c: &C, j: usize, budget: usize, seed: SeedSpec) -> Option<SpiralWitness> {
        if j == 0 || budget == 0 {
            return None;
        }
        // Cheapest and rarest parts first.
        let outer_circuits = nested_circuits(&View { band: &self.outer, host: c }, j)?;
        let inner_circuits = nested_circuits(&View { band: &self.inner, host: c }, j)?;
        let whole = View { band: &self.whole, host: c };
        if self.solver.disjoint_arms(&whole, Color::Black, j) < j {
            return None;
        }
        let rays: Vec<Vec<Site>> = self.solver.witness(&self.whole.annulus).arms.into_iter().map(|a| a.sites).collect();
        let active: Vec<(usize, usize)> = rays.iter().map(|r| active_indices(r, self.m)).collect::<Option<_>>()?;
        let mut rng = PhiloxRng::new(seed);
        let mut order: Vec<usize> = (0..j).collect();
        for attempt in 0..budget {
            if attempt > 0 {
                order.shuffle(&mut rng);
            }
            let middle = View { band: &self.middle, host: c };
            let mut used = HashSet::new();
            let mut spirals = vec![Vec::new(); j];
            let mut ok = true;
            for &i in &order {
                match find_turn(&middle, &rays[i], active[i], &used) {
                    Some(p) => {
                        used.extend(p.iter().copied());
                        spirals[i] = p;
                    }
                    None => {
                        ok = false;
                        break;
                    }
                }
            }
            if !ok {
                continue;
            }
            let w = SpiralWitness {
                m: self.m,
                j,
                inner_active: rays.iter().zip(&active).map(|(r, &(lo, _))| r[lo]).collect(),
                outer_active: rays.iter().zip(&active).map(|(r, &(_, hi))| r[hi]).collect(),
                rays,
                spirals,
                inner_circuits,
                outer_circuits,
            };
            debug_assert!(verify_spiral(c, &w).unwrap_or(false));
            return Some(w);
        }
        None
    }
}

/// Cover-graph search for a black path in the band that leaves the active
/// segment of `ray` and rejoins it further out, one turn higher. The ray
/// blocks every loop around the hole, so the path found is simple.
fn find_turn<C: Coloring>(c: &C, ray: &[Site], (lo, hi): (usize, usize), used: &HashSet<Site>) -> Option<Vec<Site>> {
    let a = c.annulus();
    let on_ray: HashMap<Site, usize> = ray.iter().enumerate().map(|(i, &s)| (s, i)).collect();
    // Sheet of each active-segment site when the segment is lifted from sheet 0.
    let mut sheet = vec![0i32; hi + 1];
    for i in lo..hi {
        sheet[i + 1] = sheet[i] + crate::winding::sheet_shift(ray[i], ray[i + 1]);
    }
    type Node = (u32, i32);
    let mut parent: HashMap<Node, Node> = HashMap::new();
    let mut origin: HashMap<Node, usize> = HashMap::new();
    let mut queue = VecDeque::new();
    for i in lo..=hi {
        let node = (a.index_of(ray[i])? as u32, sheet[i]);
        origin.insert(node, i);
        queue.push_back(node);
    }
    while let Some(node @ (v, k)) = queue.pop_front() {
        let from = origin[&node];
        let sv = a.site(v as usize);
        for t in a.neighbor_indices(v as usize) {
            let st = a.site(t);
            let kt = k + crate::winding::sheet_shift(sv, st);
            if let Some(&i) = on_ray.get(&st) {
                if i > from && i <= hi && kt == sheet[i] + 1 {
                    let mut path = vec![st];
                    let mut cur = node;
                    loop {
                        path.push(a.site(cur.0 as usize));
                        match parent.get(&cur) {
                            Some(&p) => cur = p,
                            None => break,
                        }
                    }
                    path.reverse();
                    return Some(path);
                }
                continue;
            }
            if !c.is_black(t) || used.contains(&st) {
                continue;
            }
            let next = (t as u32, kt);
            if origin.contains_key(&next) {
                continue;
            }
            origin.insert(next, from);
            parent.insert(next, node);
            queue.push_back(next);
        }
    }
    None
}

/// Seeded search for a j-spiral between radii `m` and `4m` in `c`.
pub fn find_spiral<C: Coloring>(c: &C, m: u32, j: usize, budget: usize, seed: SeedSpec) -> Result<Option<SpiralWitness>> {
    let mut s = SpiralSearcher::new(c.annulus(), m)?;
    Ok(s.find(c, j, budget, seed))
}

/// Scales `n, 4n, 16n, ...` whose spiral annuli `S_{m,4m}` fit in `S_{n,N}`.
pub fn dyadic_scales(n: u32, outer: u32) -> Vec<u32> {
    let mut out = Vec::new();
    let mut m = n.max(1) as u64;
    while 4 * m <= outer as u64 {
        out.push(m as u32);
        m *= 4;
    }
    out
}

/// Spiral searchers for every dyadic scale of a host annulus.
pub struct SpiralCounter {
    searchers: Vec<SpiralSearcher>,
}

impl SpiralCounter {
    pub fn new(host: &Annulus, n: u32, outer: u32) -> Result<Self> {
        if n >= outer {
            return Err(Error::domain(format!("need n < N, got {n} and {outer}")));
        }
        let searchers = dyadic_scales(n, outer).into_iter().map(|m| SpiralSearcher::new(host, m)).collect::<Result<_>>()?;
        Ok(SpiralCounter { searchers })
    }

    pub fn scales(&self) -> Vec<u32> {
        self.searchers.iter().map(|s| s.m()).collect()
    }

    /// Number of scales at which a verified spiral was found.
    pub fn count<C: Coloring>(&mut self, c: &C, j: usize, budget: usize, seed: SeedSpec) -> usize {
        let mut hits = 0;
        for (k, s) in self.searchers.iter_mut().enumerate() {
            if let Some(w) = s.find(c, j, budget, seed.offset(k as u64)) {
                if verify_spiral(c, &w).unwrap_or(false) {
                    hits += 1;
                }
            }
        }
        hits
    }
}

/// Greedy lower bound on the number of disjoint j-spirals between radii `n`
/// and `N`, one attempt per sub-annulus `S_{m,4m}` of the dyadic schedule.
pub fn count_disjoint_spirals<C: Coloring>(c: &C, n: u32, outer: u32, j: usize, budget: usize, seed: SeedSpec) -> Result<usize> {
    Ok(SpiralCounter::new(c.annulus(), n, outer)?.count(c, j, budget, seed))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpiralGrowthPoint {
    pub ratio: u32,
    pub samples: u64,
    pub mean_count: f64,
    pub stderr: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpiralGrowth {
    pub points: Vec<SpiralGrowthPoint>,
    /// Least-squares slope of the per-sample count on `ln(N/n)`.
    pub slope: f64,
    pub slope_stderr: f64,
    /// Whether the slope is positive at 95% confidence.
    pub positive: bool,
}

/// Mean verified spiral count at density `p` for each `N = n * ratio`,
/// regressed on `ln(N/n)` over all individual samples.
pub fn spiral_growth(n: u32, ratios: &[u32], j: usize, p: f64, samples: u64, budget: usize, seed: SeedSpec) -> Result<SpiralGrowth> {
    if ratios.len() < 2 || samples < 2 {
        return Err(Error::domain("need two ratios and two samples per ratio"));
    }
    let mut points = Vec::new();
    let mut xy = Vec::new();
    for (k, &ratio) in ratios.iter().enumerate() {
        let host = Annulus::new(n, n * ratio)?;
        let mut counter = SpiralCounter::new(&host, n, n * ratio)?;
        let mut lazy = LazyConfig::new(&host, p, seed)?;
        let base = seed.offset(k as u64 * STREAM_BLOCK);
        let x = (ratio as f64).ln();
        let (mut sum, mut sum_sq) = (0.0, 0.0);
        for i in 0..samples {
            lazy.reset(base.offset(2 * i));
            let c = counter.count(&lazy, j, budget, base.offset(2 * i + 1)) as f64;
            sum += c;
            sum_sq += c * c;
            xy.push((x, c));
        }
        let mean = sum / samples as f64;
        let var = ((sum_sq - sum * mean) / (samples - 1) as f64).max(0.0);
        points.push(SpiralGrowthPoint {
            ratio,
            samples,
            mean_count: mean,
            stderr: (var / samples as f64).sqrt(),
        });
    }
    let m = xy.len() as f64;
    let (mx, my) = (xy.iter().map(|p| p.0).sum::<f64>() / m, xy.iter().map(|p| p.1).sum::<f64>() / m);
    let sxx: f64 = xy.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = xy.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let slope = sxy / sxx;
    let rss: f64 = xy.iter().map(|p| (p.1 - my - slope * (p.0 - mx)).powi(2)).sum();
    let slope_stderr = (rss / (m - 2.0) / sxx).sqrt();
    Ok(SpiralGrowth {
        points,
        slope,
        slope_stderr,
        positive: slope - 1.96 * slope_stderr > 0.0,
    })
}

impl SpiralWitness {
    /// Line-oriented form: a header, then one line per path listing host
    /// annulus site indices.
    pub fn to_text(&self, host: &Annulus) -> Result<String> {
        let idx = |s: &Site| host.index_of(*s).ok_or_else(|| Error::domain(format!("site {s} outside the annulus")));
        let mut out = format!("spiral m={} j={}\n", self.m, self.j);
        for (tag, family) in [
            ("ray", &self.rays),
            ("turn", &self.spirals),
            ("inner", &self.inner_circuits),
            ("outer", &self.outer_circuits),
        ] {
            for (i, p) in family.iter().enumerate() {
                let _ = write!(out, "{tag} {i}");
                for s in p {
                    let _ = write!(out, " {}", idx(s)?);
                }
                out.push('\n');
            }
        }
        for i in 0..self.j {
            let _ = writeln!(out, "active {i} {} {}", idx(&self.inner_active[i])?, idx(&self.outer_active[i])?);
        }
        Ok(out)
    }

    pub fn from_text(text: &str, host: &Annulus) -> Result<SpiralWitness> {
        let err = |line: usize, message: String| Error::Parse { line, message };
        let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
        let (_, head) = lines.next().ok_or_else(|| err(1, "empty witness".into()))?;
        let mut w = SpiralWitness {
            m: 0,
            j: 0,
            rays: Vec::new(),
            spirals: Vec::new(),
            inner_circuits: Vec::new(),
            outer_circuits: Vec::new(),
            inner_active: Vec::new(),
            outer_active: Vec::new(),
        };
        let mut head_words = head.split_whitespace();
        if head_words.next() != Some("spiral") {
            return Err(err(1, "expected `spiral m=<m> j=<j>`".into()));
        }
        for word in head_words {
            match word.split_once('=') {
                Some(("m", v)) => w.m = v.parse().map_err(|_| err(1, format!("bad m `{v}`")))?,
                Some(("j", v)) => w.j = v.parse().map_err(|_| err(1, format!("bad j `{v}`")))?,
                _ => return Err(err(1, format!("unexpected `{word}`"))),
            }
        }
        for (no, line) in lines {
            let line_no = no + 1;
            let mut words = line.split_whitespace();
            let tag = words.next().unwrap();
            let mut nums = Vec::new();
            for word in words {
                let i: usize = word.parse().map_err(|_| err(line_no, format!("bad index `{word}`")))?;
                if i >= host.len() {
                    return Err(err(line_no, format!("index {i} outside the annulus")));
                }
                nums.push(i);
            }
            let Some((&slot, rest)) = nums.split_first() else {
                return Err(err(line_no, "missing path number".into()));
            };
            let sites: Vec<Site> = rest.iter().map(|&i| host.site(i)).collect();
            let family = match tag {
                "ray" => &mut w.rays,
                "turn" => &mut w.spirals,
                "inner" => &mut w.inner_circuits,
                "outer" => &mut w.outer_circuits,
                "active" => {
                    if sites.len() != 2 || slot != w.inner_active.len() {
                        return Err(err(line_no, "expected `active <i> <inner> <outer>` in order".into()));
                    }
                    w.inner_active.push(sites[0]);
                    w.outer_active.push(sites[1]);
                    continue;
                }
                _ => return Err(err(line_no, format!("unknown record `{tag}`"))),
            };
            if slot != family.len() {
                return Err(err(line_no, format!("path {slot} out of order")));
            }
            family.push(sites);
        }
        Ok(w)
    }
}

/// Two families of disjoint crossings of `S_{inner,outer}`: the paths to be
/// corrected (`deltas`, counterclockwise by starting point) and the paths
/// turning further (`gammas`).
#[derive(Clone, Debug, PartialEq)]
pub struct RerouteInstance {
    pub j: usize,
    pub inner: u32,
    pub outer: u32,
    pub gammas: Vec<LatticePath>,
    pub deltas: Vec<LatticePath>,
}

impl RerouteInstance {
    fn check_crossing(&self, p: &LatticePath, what: &str) -> Result<()> {
        let s = p.sites();
        let ok = p.is_simple()
            && s.iter().all(|&x| radius_band(x, self.inner, self.outer))
            && s[0].lattice_neighbors().iter().any(|t| t.in_disc(self.inner))
            && s.last().unwrap().lattice_neighbors().iter().any(|t| !t.in_disc(self.outer));
        if ok {
            Ok(())
        } else {
            Err(Error::domain(format!("{what} is not a simple crossing of S_{{{},{}}}", self.inner, self.outer)))
        }
    }

    /// Shape checks (domain errors) followed by the winding hypothesis of
    /// the lemma, measured relative to the paths being corrected.
    pub fn validate(&self) -> Result<()> {
        let j = self.j;
        if j == 0 || self.gammas.len() != j || self.deltas.len() != j {
            return Err(Error::domain(format!("need {j} paths in each family, j >= 1")));
        }
        if self.inner >= self.outer {
            return Err(Error::domain("inner radius must be below outer radius"));
        }
        for (k, (g, d)) in self.gammas.iter().zip(&self.deltas).enumerate() {
            self.check_crossing(g, &format!("gamma {k}"))?;
            self.check_crossing(d, &format!("delta {k}"))?;
        }
        let sites = |f: &[LatticePath]| f.iter().map(|p| p.sites().to_vec()).collect::<Vec<_>>();
        if !pairwise_disjoint(&sites(&self.gammas)) {
            return Err(Error::domain("gammas are not pairwise disjoint"));
        }
        if !pairwise_disjoint(&sites(&self.deltas)) {
            return Err(Error::domain("deltas are not pairwise disjoint"));
        }
        let angles: Vec<f64> = self.deltas.iter().map(|d| self.foot_angle(d.sites()[0])).collect();
        let first = (0..j).min_by(|&a, &b| angles[a].total_cmp(&angles[b])).unwrap();
        if !(1..j).all(|i| angles[(first + i - 1) % j] < angles[(first + i) % j]) {
            return Err(Error::domain("deltas are not in counterclockwise order"));
        }
        let need = TWO_PI * (1.0 + 2.0 / j as f64);
        for k in 0..j {
            let rel = self.gammas[k].winding() - self.deltas[k].winding();
            if rel <= need {
                return Err(Error::precondition(format!(
                    "gamma {k} turns {rel:.4} rad beyond delta {k}, the lemma needs more than {need:.4}"
                )));
            }
        }
        Ok(())
    }

    /// The neighbour inside the hole through which a path starting at `s`
    /// is continued.
    fn foot(&self, s: Site) -> Site {
        *s.lattice_neighbors()
            .iter()
            .filter(|t| t.in_disc(self.inner))
            .max_by_key(|t| t.norm_sq())
            .expect("inner boundary site")
    }

    /// The neighbour outside the disc through which a path ending at `s` is
    /// continued.
    fn head(&self, s: Site) -> Site {
        *s.lattice_neighbors()
            .iter()
            .filter(|t| !t.in_disc(self.outer))
            .min_by_key(|t| t.norm_sq())
            .expect("outer boundary site")
    }

    /// Argument, in `[0, 2 pi)`, at which the continuation of a path starting
    /// at `s` crosses a circle strictly between the hole and every site.
    fn foot_angle(&self, s: Site) -> f64 {
        let h = self.foot(s);
        let n = self.inner as f64;
        let rho = 0.5 * (n + (n * n + 1.0).sqrt());
        let (sx, sy) = s.position();
        let (hx, hy) = h.position();
        // Solve |s + t (h - s)| = rho for t in (0, 1].
        let (dx, dy) = (hx - sx, hy - sy);
        let qa = dx * dx + dy * dy;
        let qb = 2.0 * (sx * dx + sy * dy);
        let qc = sx * sx + sy * sy - rho * rho;
        let t = (-qb - (qb * qb - 4.0 * qa * qc).max(0.0).sqrt()) / (2.0 * qa);
        let (x, y) = (sx + t * dx, sy + t * dy);
        y.atan2(x).rem_euclid(TWO_PI)
    }
}

/// Which side of a path a neighbour of one of its sites lies on.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Side {
    Left,
    Right,
}

/// Position of a site on the corrected family: path and index along it.
#[derive(Clone, Copy, Debug)]
struct OnDelta {
    k: usize,
    i: usize,
}

/// The annulus cut open along the deltas into `j` wedges; wedge `k` lies to
/// the left of delta `k` and to the right of delta `k + 1`.
struct Wedges<'a> {
    inst: &'a RerouteInstance,
    on_delta: HashMap<Site, OnDelta>,
    region: HashMap<Site, usize>,
}

impl<'a> Wedges<'a> {
    fn new(inst: &'a RerouteInstance) -> Result<Self> {
        let mut on_delta = HashMap::new();
        for (k, d) in inst.deltas.iter().enumerate() {
            for (i, &s) in d.sites().iter().enumerate() {
                on_delta.insert(s, OnDelta { k, i });
            }
        }
        let mut w = Wedges {
            inst,
            on_delta,
            region: HashMap::new(),
        };
        w.fill()?;
        Ok(w)
    }

    fn in_annulus(&self, s: Site) -> bool {
        radius_band(s, self.inst.inner, self.inst.outer)
    }

    /// Side of the neighbour `w` of the delta site `x`, seen walking outwards.
    fn side(&self, x: Site, w: Site) -> Side {
        let OnDelta { k, i } = self.on_delta[&x];
        let path = self.inst.deltas[k].sites();
        let prev = if i == 0 { self.inst.foot(x) } else { path[i - 1] };
        let next = if i + 1 == path.len() { self.inst.head(x) } else { path[i + 1] };
        let dir = |t: Site| x.direction_to(t).expect("lattice neighbour");
        let ccw = |t: Site| (dir(t) + 6 - dir(next)) % 6;
        debug_assert!(w != prev && w != next);
        if ccw(w) < ccw(prev) {
            Side::Left
        } else {
            Side::Right
        }
    }

    fn wedge_of_side(&self, k: usize, side: Side) -> usize {
        let j = self.inst.j;
        match side {
            Side::Left => k,
            Side::Right => (k + j - 1) % j,
        }
    }

    /// Flood-fills the wedge index over sites off the deltas.
    fn fill(&mut self) -> Result<()> {
        let mut queue = VecDeque::new();
        for (&x, &OnDelta { k, .. }) in &self.on_delta {
            for w in x.lattice_neighbors() {
                if !self.in_annulus(w) || self.on_delta.contains_key(&w) {
                    continue;
                }
                let path = self.inst.deltas[k].sites();
                let i = self.on_delta[&x].i;
                if (i > 0 && path[i - 1] == w) || (i + 1 < path.len() && path[i + 1] == w) {
                    continue;
                }
                let r = self.wedge_of_side(k, self.side(x, w));
                if let Some(&old) = self.region.get(&w) {
                    if old != r {
                        return Err(Error::domain(format!("site {w} borders two wedges")));
                    }
                } else {
                    self.region.insert(w, r);
                    queue.push_back(w);
                }
            }
        }
        while let Some(v) = queue.pop_front() {
            let r = self.region[&v];
            for w in v.lattice_neighbors() {
                if !self.in_annulus(w) || self.on_delta.contains_key(&w) {
                    continue;
                }
                match self.region.get(&w) {
                    Some(&old) if old != r => {
                        return Err(Error::domain(format!("site {w} borders two wedges")));
                    }
                    Some(_) => {}
                    None => {
                        self.region.insert(w, r);
                        queue.push_back(w);
                    }
                }
            }
        }
        Ok(())
    }

    fn is_delta_edge(&self, u: Site, w: Site) -> bool {
        match (self.on_delta.get(&u), self.on_delta.get(&w)) {
            (Some(a), Some(b)) => a.k == b.k && a.i.abs_diff(b.i) == 1,
            _ => false,
        }
    }
}

/// A node of the graph available to the route in one wedge.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
enum Node {
    /// Site `i` of the left boundary (delta `k`).
    Left(usize),
    /// Site `i` of the right boundary (delta `k + 1`).
    Right(usize),
    /// A gamma site strictly inside the wedge.
    Inside(Site),
}

struct WedgeGraph {
    left_len: usize,
    right_len: usize,
    left: usize,
    right: usize,
    adj: HashMap<Node, Vec<Node>>,
}

impl WedgeGraph {
    fn add(&mut self, a: Node, b: Node) {
        self.adj.entry(a).or_default().push(b);
        self.adj.entry(b).or_default().push(a);
    }

    /// Shortest route from the start of the left boundary to the end of the
    /// right one, using left sites up to `lmax` and right sites from `rmin`.
    fn route(&self, lmax: usize, rmin: usize) -> Option<Vec<Node>> {
        let allowed = |n: &Node| match *n {
            Node::Left(i) => i <= lmax,
            Node::Right(i) => i >= rmin,
            Node::Inside(_) => true,
        };
        let start = Node::Left(0);
        let goal = Node::Right(self.right_len - 1);
        let mut parent: HashMap<Node, Node> = HashMap::new();
        let mut queue = VecDeque::from([start]);
        parent.insert(start, start);
        let step = |n: Node| -> Vec<Node> {
            let mut out = self.adj.get(&n).cloned().unwrap_or_default();
            match n {
                Node::Left(i) => {
                    if i > 0 {
                        out.push(Node::Left(i - 1));
                    }
                    if i + 1 < self.left_len {
                        out.push(Node::Left(i + 1));
                    }
                }
                Node::Right(i) => {
                    if i > 0 {
                        out.push(Node::Right(i - 1));
                    }
                    if i + 1 < self.right_len {
                        out.push(Node::Right(i + 1));
                    }
                }
                Node::Inside(_) => {}
            }
            out
        };
        while let Some(n) = queue.pop_front() {
            if n == goal {
                let mut path = vec![n];
                let mut cur = n;
                while cur != start {
                    cur = parent[&cur];
                    path.push(cur);
                }
                path.reverse();
                return Some(path);
            }
            for t in step(n) {
                if allowed(&t) && !parent.contains_key(&t) {
                    parent.insert(t, n);
                    queue.push_back(t);
                }
            }
        }
        None
    }

    /// Highest `rmin` for which a route exists with left sites up to `lmax`.
    fn best_rmin(&self, lmax: usize) -> Option<usize> {
        self.route(lmax, 0)?;
        let (mut lo, mut hi) = (0, self.right_len - 1);
        while lo < hi {
            let mid = (lo + hi).div_ceil(2);
            if self.route(lmax, mid).is_some() {
                lo = mid;
            } else {
                hi = mid - 1;
            }
        }
        Some(lo)
    }
}

fn wedge_graphs(inst: &RerouteInstance, wedges: &Wedges<'_>) -> Vec<WedgeGraph> {
    let j = inst.j;
    let mut graphs: Vec<WedgeGraph> = (0..j)
        .map(|k| WedgeGraph {
            left_len: inst.deltas[k].len(),
            right_len: inst.deltas[(k + 1) % j].len(),
            left: k,
            right: (k + 1) % j,
            adj: HashMap::new(),
        })
        .collect();
    // Each gamma edge off the deltas lies inside one wedge; its ends are
    // inside sites or boundary sites on the side the edge leaves from.
    let node_at = |x: Site, toward: Site| -> (usize, Node) {
        match wedges.on_delta.get(&x) {
            None => (wedges.region[&x], Node::Inside(x)),
            Some(&OnDelta { k, i }) => match wedges.side(x, toward) {
                Side::Left => (k, Node::Left(i)),
                Side::Right => ((k + j - 1) % j, Node::Right(i)),
            },
        }
    };
    for g in &inst.gammas {
        for e in g.sites().windows(2) {
            let (u, w) = (e[0], e[1]);
            if wedges.is_delta_edge(u, w) {
                continue;
            }
            let (ru, nu) = node_at(u, w);
            let (rw, nw) = node_at(w, u);
            debug_assert_eq!(ru, rw, "edge {u}-{w} straddles two wedges");
            graphs[ru].add(nu, nw);
        }
    }
    graphs
}

/// The rerouting lemma on the lattice: `j` disjoint paths, the `k`-th from
/// the start of delta `k` to the end of delta `k + 1`, each inside delta `k`,
/// delta `k + 1` and the pieces of the gammas lying between them.
///
/// Within each wedge the route climbs delta `k`, follows gamma pieces and
/// finishes along delta `k + 1`. Routes of neighbouring wedges share a delta,
/// so the one below must leave it before the one above joins it; the search
/// picks, for every wedge, how far up its left boundary it may climb.
pub fn reroute(inst: &RerouteInstance) -> Result<Vec<LatticePath>> {
    inst.validate()?;
    let j = inst.j;
    let wedges = Wedges::new(inst)?;
    let graphs = wedge_graphs(inst, &wedges);
    let mut memo: Vec<HashMap<usize, Option<usize>>> = vec![HashMap::new(); j];
    let mut best = |k: usize, lmax: usize| -> Option<usize> { *memo[k].entry(lmax).or_insert_with(|| graphs[k].best_rmin(lmax)) };
    let mut limits = None;
    'first: for l0 in 0..inst.deltas[0].len() {
        let mut l = vec![l0; j];
        for k in 0..j {
            let Some(r) = best(k, l[k]) else { continue 'first };
            let next = (k + 1) % j;
            if next == 0 {
                if l[0] >= r {
                    continue 'first;
                }
            } else {
                if r == 0 {
                    continue 'first;
                }
                l[next] = (r - 1).min(inst.deltas[next].len() - 1);
            }
        }
        limits = Some(l);
        break;
    }
    let l = limits.ok_or_else(|| Error::precondition("no disjoint rerouting exists in the union of the paths"))?;
    let mut out = Vec::with_capacity(j);
    for k in 0..j {
        let g = &graphs[k];
        let rmin = best(k, l[k]).expect("feasible");
        let nodes = g.route(l[k], rmin).expect("feasible");
        let sites: Vec<Site> = nodes
            .into_iter()
            .map(|n| match n {
                Node::Left(i) => inst.deltas[g.left].sites()[i],
                Node::Right(i) => inst.deltas[g.right].sites()[i],
                Node::Inside(s) => s,
            })
            .collect();
        out.push(LatticePath::new(sites)?);
    }
    Ok(out)
}

/// Independent check of a rerouting: shape, disjointness, containment and
/// winding bookkeeping. Returns the list of violations.
pub fn check_reroute(inst: &RerouteInstance, out: &[LatticePath]) -> Vec<String> {
    let j = inst.j;
    let mut bad = Vec::new();
    if out.len() != j {
        bad.push(format!("{} paths for j = {j}", out.len()));
        return bad;
    }
    let gamma_sites: HashSet<Site> = inst.gammas.iter().flat_map(|p| p.sites().iter().copied()).collect();
    let delta_of: HashMap<Site, usize> = inst
        .deltas
        .iter()
        .enumerate()
        .flat_map(|(k, p)| p.sites().iter().map(move |&s| (s, k)))
        .collect();
    let mut seen: HashMap<Site, usize> = HashMap::new();
    for (k, p) in out.iter().enumerate() {
        let next = &inst.deltas[(k + 1) % j];
        if !is_simple_path(p.sites()) {
            bad.push(format!("path {k} is not a simple lattice path"));
        }
        if p.sites()[0] != inst.deltas[k].sites()[0] {
            bad.push(format!("path {k} does not start where delta {k} starts"));
        }
        if p.sites().last() != next.sites().last() {
            bad.push(format!("path {k} does not end where delta {} ends", (k + 1) % j));
        }
        for s in p.sites() {
            // Off its two deltas a path may only use gamma sites, and never
            // touches a third delta.
            match delta_of.get(s) {
                Some(&d) if d == k || d == (k + 1) % j => {}
                Some(&d) => bad.push(format!("path {k} touches delta {d} at {s}")),
                None if !gamma_sites.contains(s) => bad.push(format!("path {k} leaves the union of the inputs at {s}")),
                None => {}
            }
            if let Some(o) = seen.insert(*s, k) {
                if o != k {
                    bad.push(format!("paths {o} and {k} share {s}"));
                }
            }
        }
    }
    let gained: f64 = out.iter().map(LatticePath::winding).sum::<f64>() - inst.deltas.iter().map(LatticePath::winding).sum::<f64>();
    if (gained - TWO_PI).abs() > 1e-6 {
        bad.push(format!("family gained {gained:.6} rad instead of one full turn"));
    }
    for k in 0..j {
        // Each path ends where the next delta ends, so it turns by that delta
        // plus the gap between the two starting points.
        let (a, b) = (inst.deltas[k].sites()[0], inst.deltas[(k + 1) % j].sites()[0]);
        let gap = out[k].winding() - inst.deltas[(k + 1) % j].winding();
        let arg = |s: Site| s.position().1.atan2(s.position().0);
        let frac = ((gap - (arg(b) - arg(a))) / TWO_PI).round();
        let off = gap - (arg(b) - arg(a)) - frac * TWO_PI;
        if off.abs() > 1e-6 || !(-2.0 * ANGULAR_QUANTUM..=TWO_PI + 2.0 * ANGULAR_QUANTUM).contains(&gap) {
            bad.push(format!("path {k} turns {gap:.4} rad past delta {}, outside one wedge", (k + 1) % j));
        }
    }
    bad
}

/// Iterates [`reroute`] with the current family as deltas and `lambda_primes`
/// as gammas, `j` times. Returns the `j` successive families; each winding
/// ends exactly one turn above where it began.
pub fn increase_winding(
    inner: u32,
    outer: u32,
    lambdas: &[LatticePath],
    lambda_primes: &[LatticePath],
) -> Result<Vec<Vec<LatticePath>>> {
    let j = lambdas.len();
    if j == 0 || lambda_primes.len() != j {
        return Err(Error::domain("families must have the same positive size"));
    }
    for k in 0..j {
        let d = lambda_primes[k].winding() - lambdas[k].winding();
        if d < TWO_PI - EPS {
            return Err(Error::precondition(format!("path {k}: winding difference {d:.4} is below 2 pi")));
        }
    }
    let mut families = Vec::with_capacity(j);
    let mut current = lambdas.to_vec();
    for step in 1..=j {
        let inst = RerouteInstance {
            j,
            inner,
            outer,
            gammas: lambda_primes.to_vec(),
            deltas: current,
        };
        let next = reroute(&inst).map_err(|e| Error::Step { step, source: Box::new(e) })?;
        families.push(next.clone());
        current = next;
    }
    Ok(families)
}

/// Nearest lattice site to a planar point.
fn nearest_site(x: f64, y: f64) -> Site {
    let rf = y * 2.0 / 3f64.sqrt();
    let qf = x - 0.5 * rf;
    let sf = -qf - rf;
    let (mut q, mut r, s) = (qf.round(), rf.round(), sf.round());
    let (dq, dr, ds) = ((q - qf).abs(), (r - rf).abs(), (s - sf).abs());
    if dq > dr && dq > ds {
        q = -r - s;
    } else if dr > ds {
        r = -q - s;
    }
    Site::new(q as i32, r as i32)
}

/// Drops every loop, keeping the first visit of each site.
fn erase_loops(path: Vec<Site>) -> Vec<Site> {
    let mut out: Vec<Site> = Vec::with_capacity(path.len());
    let mut at: HashMap<Site, usize> = HashMap::new();
    for s in path {
        if let Some(&i) = at.get(&s) {
            for t in out.drain(i + 1..) {
                at.remove(&t);
            }
        } else {
            at.insert(s, out.len());
            out.push(s);
        }
    }
    out
}

/// Lattice trace of a planar curve, extended radially to both boundaries.
fn trace_crossing(curve: &[(f64, f64)], inner: u32, outer: u32) -> Vec<Site> {
    let mut path: Vec<Site> = Vec::new();
    for &(x, y) in curve {
        let s = nearest_site(x, y);
        match path.last() {
            Some(&p) if p == s => {}
            Some(&p) if !p.is_adjacent(s) => {
                let bridge = p.lattice_neighbors().into_iter().find(|t| t.is_adjacent(s)).expect("dense sampling");
                path.extend([bridge, s]);
            }
            _ => path.push(s),
        }
    }
    let mut head = vec![path[0]];
    while let Some(&s) = head.last() {
        if s.lattice_neighbors().iter().any(|t| t.in_disc(inner)) {
            break;
        }
        head.push(*s.lattice_neighbors().iter().min_by_key(|t| t.norm_sq()).unwrap());
    }
    head.reverse();
    head.pop();
    head.extend(path);
    while let Some(&s) = head.last() {
        if s.lattice_neighbors().iter().any(|t| !t.in_disc(outer)) {
            break;
        }
        head.push(*s.lattice_neighbors().iter().max_by_key(|t| t.norm_sq()).unwrap());
    }
    erase_loops(head)
}

/// Straight crossings along the lattice directions at angles `2 pi k / j`.
fn lattice_rays(j: usize, inner: u32, outer: u32) -> Result<Vec<LatticePath>> {
    if !matches!(j, 1 | 2 | 3 | 6) {
        return Err(Error::domain(format!("straight rays need j dividing 6, got {j}")));
    }
    (0..j)
        .map(|k| {
            let d = 6 * k / j;
            let (dq, dr) = crate::lattice::DIRECTIONS[d];
            let t0 = inner as i32 + 1;
            LatticePath::new((t0..=outer as i32).map(|t| Site::new(t * dq, t * dr)).collect())
        })
        .collect()
}

/// `j` interleaved Archimedean spirals, each turning by about `turn` radians,
/// traced on the lattice. Returns the paths and the outer radius they reach.
fn spiral_family(j: usize, inner: u32, turn: f64, rng: &mut PhiloxRng) -> Result<(Vec<LatticePath>, u32)> {
    use rand::Rng;
    let gap = 3.5 + rng.gen::<f64>() * 2.0;
    let c = gap * j as f64 / TWO_PI;
    let wobble = rng.gen::<f64>() * 0.6;
    let freq = rng.gen_range(2..5) as f64;
    let psi = rng.gen::<f64>() * TWO_PI;
    let phase = rng.gen::<f64>() * TWO_PI;
    let r0 = inner as f64 + 2.0 + wobble;
    let top = r0 + c * turn + wobble;
    let outer = top.ceil() as u32 + 2;
    let dt = 0.05 / top;
    let steps = (turn / dt).ceil() as usize;
    let mut family = Vec::with_capacity(j);
    for k in 0..j {
        let t0 = phase + TWO_PI * (k as f64 + 0.5) / j as f64;
        let curve: Vec<(f64, f64)> = (0..=steps)
            .map(|i| {
                let t = t0 + turn * i as f64 / steps as f64;
                let rho = r0 + c * (t - t0) + wobble * (freq * t + psi).sin();
                (rho * t.cos(), rho * t.sin())
            })
            .collect();
        family.push(LatticePath::new(trace_crossing(&curve, inner, outer))?);
    }
    Ok((family, outer))
}

fn synthetic_attempts<T>(seed: SeedSpec, mut build: impl FnMut(&mut PhiloxRng) -> Result<Option<T>>) -> Result<T> {
    let mut rng = PhiloxRng::new(seed);
    for _ in 0..64 {
        if let Some(t) = build(&mut rng)? {
            return Ok(t);
        }
    }
    Err(Error::domain("no valid synthetic instance after 64 attempts"))
}

/// A random instance of the rerouting lemma: the deltas are straight rays at
/// angles `2 pi k / j`, the gammas interleaved spirals turning past them.
pub fn synthetic_reroute_instance(j: usize, seed: SeedSpec) -> Result<RerouteInstance> {
    use rand::Rng;
    synthetic_attempts(seed, |rng| {
        let inner = rng.gen_range(0..6);
        let turn = TWO_PI * (1.0 + 2.0 / j as f64) + 0.6 + rng.gen::<f64>() * 4.0 * PI;
        let (gammas, outer) = spiral_family(j, inner, turn, rng)?;
        let inst = RerouteInstance {
            j,
            inner,
            outer,
            gammas,
            deltas: lattice_rays(j, inner, outer)?,
        };
        Ok(inst.validate().is_ok().then_some(inst))
    })
}

/// Families for [`increase_winding`]: straight rays and spirals turning far
/// enough past them for all `j` rerouting steps.
pub fn synthetic_winding_families(j: usize, seed: SeedSpec) -> Result<(u32, u32, Vec<LatticePath>, Vec<LatticePath>)> {
    use rand::Rng;
    synthetic_attempts(seed, |rng| {
        let inner = rng.gen_range(0..6);
        let need = TWO_PI * (2.0 + 1.0 / j as f64);
        let turn = need + 0.6 + rng.gen::<f64>() * TWO_PI;
        let (primes, outer) = spiral_family(j, inner, turn, rng)?;
        let rays = lattice_rays(j, inner, outer)?;
        let inst = RerouteInstance {
            j,
            inner,
            outer,
            gammas: primes.clone(),
            deltas: rays.clone(),
        };
        let margin = (0..j).all(|k| primes[k].winding() - rays[k].winding() > need + 1e-6);
        Ok((margin && inst.validate().is_ok()).then_some((inner, outer, rays, primes)))
    })
}
