//! Arm events in an annulus.
//!
//! Disjoint crossings are counted as a maximum flow with unit vertex
//! capacities; the dual quantity is the least number of black sites on a
//! circuit around the hole, found as a shortest odd closed walk in the
//! two-sheeted cover cut along the positive real ray.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::{crosses_cut, min_inner_radius, Annulus, Site, NO_SITE};
use crate::sample::{Color, Coloring};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum SigmaClass {
    /// `j` black arms.
    Mono,
    /// `j - 1` black arms and one white arm.
    PolyOneWhite,
    OneBlack,
    OneWhite,
}

impl SigmaClass {
    pub fn name(self) -> &'static str {
        match self {
            SigmaClass::Mono => "mono",
            SigmaClass::PolyOneWhite => "poly_one_white",
            SigmaClass::OneBlack => "one_black",
            SigmaClass::OneWhite => "one_white",
        }
    }

    pub fn from_name(s: &str) -> Option<SigmaClass> {
        [Self::Mono, Self::PolyOneWhite, Self::OneBlack, Self::OneWhite]
            .into_iter()
            .find(|c| c.name().eq_ignore_ascii_case(s))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ArmQuery {
    pub j: usize,
    pub sigma_class: SigmaClass,
    pub n: u32,
    #[serde(rename = "N")]
    pub outer: u32,
}

impl ArmQuery {
    pub fn new(j: usize, sigma_class: SigmaClass, n: u32, outer: u32) -> Result<Self> {
        let q = ArmQuery {
            j,
            sigma_class,
            n,
            outer,
        };
        q.validate()?;
        Ok(q)
    }

    pub fn validate(&self) -> Result<()> {
        if self.j == 0 {
            return Err(Error::domain("arm count must be at least 1"));
        }
        if self.sigma_class == SigmaClass::PolyOneWhite && self.j < 2 {
            return Err(Error::domain("the one-white class needs j >= 2"));
        }
        let n0 = min_inner_radius(self.j)?;
        if self.n < n0 {
            return Err(Error::domain(format!(
                "inner radius {} is below the minimum {n0} for {} arms",
                self.n, self.j
            )));
        }
        if self.n >= self.outer {
            return Err(Error::InvalidGeometry(format!(
                "inner radius {} must be smaller than outer radius {}",
                self.n, self.outer
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Arm {
    pub color: Color,
    /// Inner boundary first.
    pub sites: Vec<Site>,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct ArmWitness {
    pub arms: Vec<Arm>,
}

impl ArmWitness {
    pub fn len(&self) -> usize {
        self.arms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.arms.is_empty()
    }

    /// Independent validity check: each arm is a simple nearest-neighbour path
    /// of its colour from the inner to the outer boundary, and arms are disjoint.
    pub fn check<C: Coloring>(&self, c: &C) -> Result<()> {
        let a = c.annulus();
        let mut seen = std::collections::HashSet::new();
        for (k, arm) in self.arms.iter().enumerate() {
            let bad = |m: String| Err(Error::domain(format!("arm {k}: {m}")));
            let (Some(&first), Some(&last)) = (arm.sites.first(), arm.sites.last()) else {
                return bad("empty".into());
            };
            let mut idx = Vec::with_capacity(arm.sites.len());
            for &s in &arm.sites {
                match a.index_of(s) {
                    Some(i) => idx.push(i),
                    None => return bad(format!("{s} is outside the annulus")),
                }
            }
            if !a.is_inner(idx[0]) {
                return bad(format!("starts at {first}, not on the inner boundary"));
            }
            if !a.is_outer(*idx.last().unwrap()) {
                return bad(format!("ends at {last}, not on the outer boundary"));
            }
            for w in arm.sites.windows(2) {
                if !w[0].is_adjacent(w[1]) {
                    return bad(format!("{} and {} are not adjacent", w[0], w[1]));
                }
            }
            for (&s, &i) in arm.sites.iter().zip(&idx) {
                if !c.has_color(i, arm.color) {
                    return bad(format!("{s} has the wrong colour"));
                }
                if !seen.insert(s) {
                    return bad(format!("{s} is used twice"));
                }
            }
        }
        Ok(())
    }
}

const USED: u8 = 1;
const SRC: u8 = 2;
const SNK: u8 = 4;
const TOUCHED: u8 = 8;
const INNER: u8 = 1;
const OUTER: u8 = 2;
const NONE: u32 = NO_SITE;
const SEED_PARENT: u32 = u32::MAX;

/// Everything a search touches at one site, kept in a single cache line:
/// at critical scales the explored region is sparse and cache misses dominate.
#[derive(Clone, Copy)]
#[repr(C, align(64))]
struct Slot {
    /// Neighbour indices sorted by increasing norm, so that a stack pops the
    /// outermost neighbour first and searches head for the outer boundary.
    outward: [u32; 6],
    /// Visit stamps and search parents of the entry and exit halves.
    visit: [u32; 2],
    parent: [u32; 2],
    next: u32,
    prev: u32,
    boundary: u8,
    flow: u8,
}

/// Reusable scratch space for detection on one annulus.
///
/// Every query leaves the solver ready for the next one; results never depend
/// on earlier queries.
pub struct ArmSolver {
    epoch: u32,
    slots: Vec<Slot>,
    stack: Vec<u32>,
    touched: Vec<u32>,
    flow_color: Color,
}

impl ArmSolver {
    pub fn new(annulus: &Annulus) -> Self {
        let slots = (0..annulus.len())
            .map(|v| {
                let mut outward = *annulus.neighbor_slots(v);
                outward.sort_by_key(|&t| if t == NO_SITE { -1 } else { annulus.site(t as usize).norm_sq() });
                Slot {
                    outward,
                    visit: [0; 2],
                    parent: [0; 2],
                    next: NONE,
                    prev: NONE,
                    boundary: (annulus.is_inner(v) as u8 * INNER) | (annulus.is_outer(v) as u8 * OUTER),
                    flow: 0,
                }
            })
            .collect();
        ArmSolver {
            epoch: 0,
            slots,
            stack: Vec::new(),
            touched: Vec::new(),
            flow_color: Color::Black,
        }
    }

    fn check_len<C: Coloring>(&self, c: &C) {
        assert_eq!(c.annulus().len(), self.slots.len(), "solver built for another annulus");
    }

    fn bump(&mut self) -> u32 {
        self.epoch = self.epoch.wrapping_add(1);
        if self.epoch == 0 {
            self.slots.iter_mut().for_each(|s| s.visit = [0; 2]);
            self.epoch = 1;
        }
        self.epoch
    }

    /// Whether a cluster of `color` joins the two boundaries.
    pub fn has_one_arm<C: Coloring>(&mut self, c: &C, color: Color) -> bool {
        self.check_len(c);
        let e = self.bump();
        self.stack.clear();
        for &s in c.annulus().inner_boundary() {
            if c.has_color(s as usize, color) {
                let slot = &mut self.slots[s as usize];
                if slot.boundary & OUTER != 0 {
                    return true;
                }
                slot.visit[0] = e;
                self.stack.push(s);
            }
        }
        while let Some(v) = self.stack.pop() {
            let outward = self.slots[v as usize].outward;
            for t in outward {
                if t == NO_SITE {
                    continue;
                }
                let slot = &mut self.slots[t as usize];
                if slot.visit[0] == e {
                    continue;
                }
                slot.visit[0] = e;
                if c.has_color(t as usize, color) {
                    if slot.boundary & OUTER != 0 {
                        return true;
                    }
                    self.stack.push(t);
                }
            }
        }
        false
    }

    fn reset_flow(&mut self) {
        for &v in &self.touched {
            let s = &mut self.slots[v as usize];
            s.flow = 0;
            s.next = NONE;
            s.prev = NONE;
        }
        self.touched.clear();
    }

    fn touch(&mut self, v: usize) {
        let s = &mut self.slots[v];
        if s.flow & TOUCHED == 0 {
            s.flow |= TOUCHED;
            self.touched.push(v as u32);
        }
    }

    /// Maximum number of vertex-disjoint crossings of `color`, stopping once
    /// `cap` are found. The flow stays available to [`ArmSolver::witness`].
    pub fn disjoint_arms<C: Coloring>(&mut self, c: &C, color: Color, cap: usize) -> usize {
        self.check_len(c);
        self.reset_flow();
        self.flow_color = color;
        let mut flow = 0;
        while flow < cap && self.augment(c, color) {
            flow += 1;
        }
        flow
    }

    #[inline]
    fn visited(&self, node: usize, e: u32) -> bool {
        self.slots[node / 2].visit[node % 2] == e
    }

    #[inline]
    fn push(&mut self, from: usize, to: usize, e: u32) {
        let s = &mut self.slots[to / 2];
        if s.visit[to % 2] != e {
            s.visit[to % 2] = e;
            s.parent[to % 2] = from as u32;
            self.stack.push(to as u32);
        }
    }

    /// One augmenting path search in the split-vertex residual graph.
    /// Node `2v` is the entry half of site `v`, `2v + 1` its exit half.
    fn augment<C: Coloring>(&mut self, c: &C, color: Color) -> bool {
        let e = self.bump();
        self.stack.clear();
        for &s in c.annulus().inner_boundary() {
            let s = s as usize;
            if self.slots[s].flow & SRC == 0 && c.has_color(s, color) {
                self.push(0, 2 * s, e);
                self.slots[s].parent[0] = SEED_PARENT;
            }
        }
        while let Some(node) = self.stack.pop() {
            let node = node as usize;
            let v = node / 2;
            let slot = self.slots[v];
            if node % 2 == 0 {
                if slot.flow & USED == 0 {
                    self.push(node, 2 * v + 1, e);
                }
                if slot.prev != NONE {
                    self.push(node, 2 * slot.prev as usize + 1, e);
                }
            } else {
                if slot.boundary & OUTER != 0 && slot.flow & SNK == 0 {
                    self.apply(node);
                    return true;
                }
                if slot.flow & USED != 0 {
                    self.push(node, 2 * v, e);
                }
                for w in slot.outward {
                    if w == NO_SITE || w == slot.next {
                        continue;
                    }
                    let w = w as usize;
                    if !self.visited(2 * w, e) && c.has_color(w, color) {
                        self.push(node, 2 * w, e);
                    }
                }
            }
        }
        false
    }

    /// Augment along the parent chain ending at exit node `last`.
    fn apply(&mut self, last: usize) {
        let mut path = vec![last];
        let mut node = last;
        loop {
            let p = self.slots[node / 2].parent[node % 2];
            if p == SEED_PARENT {
                break;
            }
            node = p as usize;
            path.push(node);
        }
        path.reverse();
        let first = path[0] / 2;
        self.touch(first);
        self.slots[first].flow |= SRC;
        for w in path.windows(2) {
            let (x, y) = (w[0], w[1]);
            let (u, v) = (x / 2, y / 2);
            self.touch(v);
            match (x % 2, y % 2) {
                (0, 1) if u == v => self.slots[v].flow |= USED,
                (1, 0) if u == v => self.slots[v].flow &= !USED,
                (1, 0) => {
                    self.slots[u].next = v as u32;
                    self.slots[v].prev = u as u32;
                }
                (0, 1) => {
                    // Cancel existing flow v -> u.
                    if self.slots[v].next == u as u32 {
                        self.slots[v].next = NONE;
                    }
                    if self.slots[u].prev == v as u32 {
                        self.slots[u].prev = NONE;
                    }
                }
                _ => unreachable!("residual arcs alternate between halves"),
            }
        }
        self.slots[last / 2].flow |= SNK;
    }

    /// The crossings carried by the current flow.
    pub fn witness(&self, annulus: &Annulus) -> ArmWitness {
        let mut arms = Vec::new();
        for &v in &self.touched {
            let v = v as usize;
            if self.slots[v].flow & SRC == 0 {
                continue;
            }
            let mut sites = vec![annulus.site(v)];
            let mut x = v;
            while self.slots[x].flow & SNK == 0 {
                x = self.slots[x].next as usize;
                sites.push(annulus.site(x));
            }
            arms.push(Arm {
                color: self.flow_color,
                sites,
            });
        }
        arms.sort_by_key(|arm| annulus.index_of(arm.sites[0]));
        ArmWitness { arms }
    }

    pub fn detect<C: Coloring>(&mut self, c: &C, q: &ArmQuery) -> Result<bool> {
        q.validate()?;
        let a = c.annulus();
        if a.inner_radius() != q.n || a.outer_radius() != q.outer {
            return Err(Error::domain(format!(
                "query is for S({}, {}) but the configuration lives on S({}, {})",
                q.n,
                q.outer,
                a.inner_radius(),
                a.outer_radius()
            )));
        }
        Ok(self.detect_unchecked(c, q))
    }

    /// [`ArmSolver::detect`] without validating the query or the annulus.
    pub(crate) fn detect_unchecked<C: Coloring>(&mut self, c: &C, q: &ArmQuery) -> bool {
        match q.sigma_class {
            SigmaClass::Mono => self.disjoint_arms(c, Color::Black, q.j) >= q.j,
            SigmaClass::PolyOneWhite => {
                // Arms of different colours are automatically disjoint.
                self.has_one_arm(c, Color::White) && self.disjoint_arms(c, Color::Black, q.j - 1) >= q.j - 1
            }
            SigmaClass::OneBlack => self.has_one_arm(c, Color::Black),
            SigmaClass::OneWhite => self.has_one_arm(c, Color::White),
        }
    }
}

pub fn has_one_arm<C: Coloring>(c: &C, color: Color) -> bool {
    ArmSolver::new(c.annulus()).has_one_arm(c, color)
}

pub fn max_disjoint_arms<C: Coloring>(c: &C, color: Color) -> usize {
    ArmSolver::new(c.annulus()).disjoint_arms(c, color, usize::MAX)
}

/// Maximum number of disjoint crossings together with a family realising it.
pub fn max_disjoint_arms_with_witness<C: Coloring>(c: &C, color: Color) -> (usize, ArmWitness) {
    let mut s = ArmSolver::new(c.annulus());
    let k = s.disjoint_arms(c, color, usize::MAX);
    (k, s.witness(c.annulus()))
}

pub fn detect<C: Coloring>(c: &C, q: &ArmQuery) -> Result<bool> {
    ArmSolver::new(c.annulus()).detect(c, q)
}

/// Clusters of `color` meeting both boundaries, each listed in site-index
/// order, clusters ordered by their first site.
pub fn crossing_clusters<C: Coloring>(c: &C, color: Color) -> Vec<Vec<Site>> {
    let a = c.annulus();
    let mut label = vec![u32::MAX; a.len()];
    let mut out = Vec::new();
    let mut stack = Vec::new();
    for start in 0..a.len() {
        if label[start] != u32::MAX || !c.has_color(start, color) {
            continue;
        }
        let mut members = vec![start];
        label[start] = start as u32;
        stack.push(start);
        while let Some(v) = stack.pop() {
            for t in a.neighbor_indices(v) {
                if label[t] == u32::MAX && c.has_color(t, color) {
                    label[t] = start as u32;
                    members.push(t);
                    stack.push(t);
                }
            }
        }
        if members.iter().any(|&v| a.is_inner(v)) && members.iter().any(|&v| a.is_outer(v)) {
            members.sort_unstable();
            out.push(members.into_iter().map(|v| a.site(v)).collect());
        }
    }
    out
}

/// Least total weight of a simple circuit of annulus sites surrounding the
/// hole. `weight(v)` is 0 or 1, or `None` for a forbidden site. Returns the
/// weight and the circuit (each site once, consecutive sites adjacent, last
/// adjacent to first), or `None` if no allowed circuit exists.
pub fn min_weight_circuit(annulus: &Annulus, weight: impl Fn(usize) -> Option<u8>) -> Option<(usize, Vec<usize>)> {
    let n = annulus.len();
    let cuts = annulus.cut_sites();
    let mut is_cut_rank = vec![usize::MAX; n];
    for (k, &x) in cuts.iter().enumerate() {
        is_cut_rank[x] = k;
    }
    let mut dist = vec![u32::MAX; 2 * n];
    let mut parent = vec![u32::MAX; 2 * n];
    let mut touched: Vec<usize> = Vec::new();
    let mut deque = VecDeque::new();
    let mut best: Option<(u32, usize)> = None;
    let mut best_walk = Vec::new();

    for (rank, &x) in cuts.iter().enumerate() {
        let Some(wx) = weight(x) else { continue };
        for &t in &touched {
            dist[t] = u32::MAX;
        }
        touched.clear();
        deque.clear();
        let bound = best.map_or(u32::MAX, |(b, _)| b + wx as u32);
        let start = 2 * x;
        dist[start] = wx as u32;
        parent[start] = u32::MAX;
        touched.push(start);
        deque.push_back(start);
        let target = 2 * x + 1;
        while let Some(node) = deque.pop_front() {
            let d = dist[node];
            if node == target {
                break;
            }
            let (v, sheet) = (node / 2, node % 2);
            let sv = annulus.site(v);
            for t in annulus.neighbor_indices(v) {
                // Cut sites of lower rank were already tried as anchors.
                if is_cut_rank[t] < rank {
                    continue;
                }
                let Some(wt) = weight(t) else { continue };
                let nd = d + wt as u32;
                if nd >= bound {
                    continue;
                }
                let ts = sheet ^ crosses_cut(sv, annulus.site(t)) as usize;
                let tn = 2 * t + ts;
                if nd < dist[tn] {
                    if dist[tn] == u32::MAX {
                        touched.push(tn);
                    }
                    dist[tn] = nd;
                    parent[tn] = node as u32;
                    if wt == 0 {
                        deque.push_front(tn);
                    } else {
                        deque.push_back(tn);
                    }
                }
            }
        }
        if dist[target] != u32::MAX {
            let w = dist[target] - wx as u32;
            if best.is_none_or(|(b, _)| w < b) {
                best = Some((w, x));
                let mut walk = Vec::new();
                let mut node = parent[target] as usize;
                while node != start {
                    walk.push(node / 2);
                    node = parent[node] as usize;
                }
                walk.push(x);
                walk.reverse();
                best_walk = walk;
                if w == 0 {
                    break;
                }
            }
        }
    }
    let (w, _) = best?;
    let cycle = simple_odd_cycle(annulus, best_walk);
    debug_assert_eq!(cycle.iter().map(|&v| weight(v).unwrap() as usize).sum::<usize>(), w as usize);
    Some((w as usize, cycle))
}

fn cycle_parity(a: &Annulus, walk: &[usize]) -> bool {
    let k = walk.len();
    (0..k).fold(false, |p, i| p ^ crosses_cut(a.site(walk[i]), a.site(walk[(i + 1) % k])))
}

/// Shrink a closed walk with odd cut parity to a simple cycle with odd parity
/// whose sites are a subset of the walk's.
fn simple_odd_cycle(a: &Annulus, mut walk: Vec<usize>) -> Vec<usize> {
    let mut pos = std::collections::HashMap::new();
    'outer: loop {
        pos.clear();
        for (i, &v) in walk.iter().enumerate() {
            if let Some(&j) = pos.get(&v) {
                let inner: Vec<usize> = walk[j..i].to_vec();
                let mut rest: Vec<usize> = walk[..j].to_vec();
                rest.extend_from_slice(&walk[i..]);
                walk = if cycle_parity(a, &inner) { inner } else { rest };
                continue 'outer;
            }
            pos.insert(v, i);
        }
        return walk;
    }
}

/// Least number of black sites on a circuit surrounding the hole, or `None`
/// when the annulus holds no circuit at all.
pub fn min_black_on_circuit<C: Coloring>(c: &C) -> Option<usize> {
    min_weight_circuit(c.annulus(), |v| Some(c.is_black(v) as u8)).map(|(w, _)| w)
}

/// Like [`min_black_on_circuit`], also returning a minimising circuit.
pub fn min_black_circuit<C: Coloring>(c: &C) -> Option<(usize, Vec<Site>)> {
    let a = c.annulus();
    min_weight_circuit(a, |v| Some(c.is_black(v) as u8)).map(|(w, cyc)| (w, cyc.into_iter().map(|v| a.site(v)).collect()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::build_annulus;
    use crate::sample::{flip_config, sample_config, SeedSpec, SiteConfig};

    fn chain_config(a: &Annulus) -> SiteConfig<'_> {
        let mut c = SiteConfig::uniform(a, Color::White);
        for v in a.radial_chain() {
            c.set(v, Color::Black);
        }
        c
    }

    #[test]
    fn uniform_configurations() {
        let a = build_annulus(2, 8).unwrap();
        let black = SiteConfig::uniform(&a, Color::Black);
        let white = SiteConfig::uniform(&a, Color::White);
        assert!(has_one_arm(&black, Color::Black));
        assert!(!has_one_arm(&black, Color::White));
        assert_eq!(max_disjoint_arms(&white, Color::Black), 0);
        assert_eq!(min_black_on_circuit(&white), Some(0));
        assert_eq!(crossing_clusters(&black, Color::Black).len(), 1);
        assert!(crossing_clusters(&white, Color::Black).is_empty());
    }

    #[test]
    fn single_radial_chain() {
        let a = build_annulus(3, 10).unwrap();
        let c = chain_config(&a);
        assert!(has_one_arm(&c, Color::Black));
        let (k, w) = max_disjoint_arms_with_witness(&c, Color::Black);
        assert_eq!(k, 1);
        w.check(&c).unwrap();
        assert_eq!(min_black_on_circuit(&c), Some(1));
    }

    #[test]
    fn two_separated_chains_give_two_clusters() {
        let a = build_annulus(3, 10).unwrap();
        let mut c = chain_config(&a);
        for q in 4..=10 {
            if let Some(v) = a.index_of(Site::new(-q, 0)) {
                c.set(v, Color::Black);
            }
        }
        assert_eq!(crossing_clusters(&c, Color::Black).len(), 2);
        assert_eq!(max_disjoint_arms(&c, Color::Black), 2);
    }

    #[test]
    fn detect_on_uniform_configurations() {
        let a = build_annulus(2, 8).unwrap();
        let black = SiteConfig::uniform(&a, Color::Black);
        let mono = ArmQuery::new(2, SigmaClass::Mono, 2, 8).unwrap();
        let poly = ArmQuery::new(2, SigmaClass::PolyOneWhite, 2, 8).unwrap();
        assert!(detect(&black, &mono).unwrap());
        assert!(!detect(&black, &poly).unwrap());
        let wrong = ArmQuery::new(2, SigmaClass::Mono, 2, 9).unwrap();
        assert!(detect(&black, &wrong).is_err());
    }

    #[test]
    fn query_validation() {
        assert!(ArmQuery::new(0, SigmaClass::Mono, 2, 8).is_err());
        assert!(ArmQuery::new(1, SigmaClass::PolyOneWhite, 2, 8).is_err());
        assert!(ArmQuery::new(2, SigmaClass::Mono, 5, 5).is_err());
        let n0 = min_inner_radius(9).unwrap();
        assert!(n0 > 0);
        assert!(ArmQuery::new(9, SigmaClass::Mono, n0 - 1, 20).is_err());
        assert!(ArmQuery::new(9, SigmaClass::Mono, n0, 20).is_ok());
        assert_eq!(SigmaClass::from_name("POLY_ONE_WHITE"), Some(SigmaClass::PolyOneWhite));
    }

    #[test]
    fn circuits_are_simple_and_enclosing() {
        let a = build_annulus(2, 9).unwrap();
        for s in 0..50 {
            let c = sample_config(&a, 0.5, SeedSpec::new(3, s)).unwrap();
            let (w, cyc) = min_black_circuit(&c).unwrap();
            let set: std::collections::HashSet<_> = cyc.iter().collect();
            assert_eq!(set.len(), cyc.len());
            for i in 0..cyc.len() {
                assert!(cyc[i].is_adjacent(cyc[(i + 1) % cyc.len()]));
            }
            let total: f64 = (0..cyc.len())
                .map(|i| crate::lattice::angle_step(cyc[i], cyc[(i + 1) % cyc.len()]))
                .sum();
            assert!((total.abs() - 2.0 * std::f64::consts::PI).abs() < 1e-9);
            let black = cyc.iter().filter(|&&s| c.is_black(a.index_of(s).unwrap())).count();
            assert_eq!(black, w);
        }
    }

    #[test]
    fn duality_and_witnesses_on_random_configurations() {
        for (n, outer) in [(0, 5), (2, 9), (4, 12)] {
            let a = build_annulus(n, outer).unwrap();
            let mut solver = ArmSolver::new(&a);
            for s in 0..200 {
                let p = [0.5, 0.7, 0.85][s as usize % 3];
                let c = sample_config(&a, p, SeedSpec::new(17, s)).unwrap();
                let k = solver.disjoint_arms(&c, Color::Black, usize::MAX);
                solver.witness(&a).check(&c).unwrap();
                assert_eq!(solver.witness(&a).len(), k);
                assert_eq!(min_black_on_circuit(&c), Some(k), "S({n},{outer}) stream {s}");
            }
        }
    }

    #[test]
    fn solver_reuse_matches_fresh_solver() {
        let a = build_annulus(2, 10).unwrap();
        let mut solver = ArmSolver::new(&a);
        for s in 0..40 {
            let c = sample_config(&a, 0.6, SeedSpec::new(8, s)).unwrap();
            for cap in [1, 2, 3, usize::MAX] {
                assert_eq!(
                    solver.disjoint_arms(&c, Color::Black, cap),
                    max_disjoint_arms(&c, Color::Black).min(cap)
                );
            }
            assert_eq!(solver.has_one_arm(&c, Color::White), has_one_arm(&c, Color::White));
        }
    }

    #[test]
    fn color_symmetry() {
        let a = build_annulus(1, 7).unwrap();
        let one_b = ArmQuery::new(1, SigmaClass::OneBlack, 1, 7).unwrap();
        let one_w = ArmQuery::new(1, SigmaClass::OneWhite, 1, 7).unwrap();
        for s in 0..100 {
            let c = sample_config(&a, 0.5, SeedSpec::new(4, s)).unwrap();
            assert_eq!(detect(&c, &one_b).unwrap(), detect(&flip_config(&c), &one_w).unwrap());
        }
    }
}
