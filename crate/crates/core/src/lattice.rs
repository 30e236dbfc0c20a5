//! Triangular-lattice geometry in axial coordinates.
//!
//! A site `(q, r)` sits at planar position `(q + r/2, r·√3/2)`, so its squared
//! Euclidean norm is the integer `q² + qr + r²`. Discs are closed:
//! `S_R = { s : |s| ≤ R }`, and the annulus of radii `n < N` is `S_N \ S_n`.

use std::f64::consts::PI;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Axial offsets of the six neighbours, in counterclockwise order starting on
/// the positive x-axis. Direction `d` and `(d + 3) % 6` are opposite.
pub const DIRECTIONS: [(i32, i32); 6] = [(1, 0), (0, 1), (-1, 1), (-1, 0), (0, -1), (1, -1)];

/// Marker for a missing neighbour slot.
pub const NO_SITE: u32 = u32::MAX;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Site {
    pub q: i32,
    pub r: i32,
}

impl Site {
    pub const ORIGIN: Site = Site { q: 0, r: 0 };

    pub const fn new(q: i32, r: i32) -> Self {
        Site { q, r }
    }

    /// Squared Euclidean norm of the planar position (exact).
    pub fn norm_sq(self) -> i64 {
        let (q, r) = (self.q as i64, self.r as i64);
        q * q + q * r + r * r
    }

    pub fn position(self) -> (f64, f64) {
        let (q, r) = (self.q as f64, self.r as f64);
        (q + 0.5 * r, r * 3f64.sqrt() / 2.0)
    }

    pub fn neighbor(self, dir: usize) -> Site {
        let (dq, dr) = DIRECTIONS[dir];
        Site::new(self.q + dq, self.r + dr)
    }

    pub fn lattice_neighbors(self) -> [Site; 6] {
        std::array::from_fn(|d| self.neighbor(d))
    }

    /// Direction index `d` with `self.neighbor(d) == other`, if adjacent.
    pub fn direction_to(self, other: Site) -> Option<usize> {
        let delta = (other.q - self.q, other.r - self.r);
        DIRECTIONS.iter().position(|&d| d == delta)
    }

    pub fn is_adjacent(self, other: Site) -> bool {
        self.direction_to(other).is_some()
    }

    /// Whether the site lies in the closed disc of the given radius.
    pub fn in_disc(self, radius: u32) -> bool {
        self.norm_sq() <= (radius as i64) * (radius as i64)
    }
}

impl fmt::Display for Site {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({},{})", self.q, self.r)
    }
}

/// Argument of the planar position in `(-π, π]`.
pub fn site_argument(s: Site) -> Result<f64> {
    if s == Site::ORIGIN {
        return Err(Error::domain("the origin has no argument"));
    }
    let (x, y) = s.position();
    // atan2(±0, negative) may return -π; fold onto the closed end of the range.
    let a = y.atan2(x);
    Ok(if a <= -PI { PI } else { a })
}

/// Argument in `[0, 2π)`, i.e. measured with the cut on the positive real ray.
pub(crate) fn cut_argument(s: Site) -> f64 {
    let (x, y) = s.position();
    let a = y.atan2(x);
    if a < 0.0 {
        a + 2.0 * PI
    } else {
        a
    }
}

/// Principal increment of the argument when stepping from `a` to `b`, in `(-π, π)`.
pub(crate) fn angle_step(a: Site, b: Site) -> f64 {
    let (ax, ay) = a.position();
    let (bx, by) = b.position();
    // Angle between the two position vectors, signed.
    let cross = ax * by - ay * bx;
    let dot = ax * bx + ay * by;
    cross.atan2(dot)
}

/// Whether the edge `a`–`b` crosses the positive real ray. Sites on the ray
/// count as lying just above it, so only edges between the ray and the row
/// `r = -1` cross.
#[inline]
pub(crate) fn crosses_cut(a: Site, b: Site) -> bool {
    let on_ray = |s: Site| s.r == 0 && s.q > 0;
    (on_ray(a) && b.r < 0) || (on_ray(b) && a.r < 0)
}

/// Half-width of an axial bounding box that contains the closed disc of `radius`.
fn axial_extent(radius: u32) -> i32 {
    // |q| ≤ 2R/√3 on the disc.
    ((radius as f64) * 2.0 / 3f64.sqrt()).ceil() as i32 + 1
}

/// All sites of the closed disc `S_radius`, lexicographic in `(r, q)`.
pub fn disc_sites(radius: u32) -> Vec<Site> {
    let e = axial_extent(radius);
    let mut out = Vec::new();
    for r in -e..=e {
        for q in -e..=e {
            let s = Site::new(q, r);
            if s.in_disc(radius) {
                out.push(s);
            }
        }
    }
    out
}

/// External boundary `∂^e S_n`: sites outside `S_n` with a neighbour inside it.
pub fn external_boundary(n: u32) -> Vec<Site> {
    let e = axial_extent(n + 2);
    let mut out = Vec::new();
    for r in -e..=e {
        for q in -e..=e {
            let s = Site::new(q, r);
            if !s.in_disc(n) && s.lattice_neighbors().iter().any(|t| t.in_disc(n)) {
                out.push(s);
            }
        }
    }
    out
}

/// Smallest inner radius whose external boundary holds at least `j` sites.
pub fn min_inner_radius(j: usize) -> Result<u32> {
    if j == 0 {
        return Err(Error::domain("arm count must be at least 1"));
    }
    (0u32..)
        .find(|&n| external_boundary(n).len() >= j)
        .ok_or_else(|| Error::domain("no radius found"))
}

/// The annulus `S_{n,N} = S_N \ S_n` with precomputed adjacency and boundaries.
///
/// Site indices follow the lexicographic `(r, q)` order and are stable for a
/// given pair of radii, which is what makes sampled configurations reproducible.
#[derive(Clone)]
pub struct Annulus {
    inner: u32,
    outer: u32,
    sites: Vec<Site>,
    neighbors: Vec<[u32; 6]>,
    inner_flag: Vec<bool>,
    outer_flag: Vec<bool>,
    inner_boundary: Vec<u32>,
    outer_boundary: Vec<u32>,
    extent: i32,
    lookup: Vec<u32>,
}

impl fmt::Debug for Annulus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Annulus")
            .field("inner", &self.inner)
            .field("outer", &self.outer)
            .field("sites", &self.sites.len())
            .finish()
    }
}

impl PartialEq for Annulus {
    fn eq(&self, other: &Self) -> bool {
        self.inner == other.inner && self.outer == other.outer
    }
}

impl Eq for Annulus {}

pub fn build_annulus(n: u32, outer: u32) -> Result<Annulus> {
    Annulus::new(n, outer)
}

impl Annulus {
    pub fn new(n: u32, outer: u32) -> Result<Self> {
        if n >= outer {
            return Err(Error::InvalidGeometry(format!(
                "inner radius {n} must be smaller than outer radius {outer}"
            )));
        }
        let extent = axial_extent(outer) + 1;
        let width = (2 * extent + 1) as usize;
        let mut lookup = vec![NO_SITE; width * width];
        let inner_sq = (n as i64) * (n as i64);
        let mut sites = Vec::new();
        for s in disc_sites(outer) {
            if s.norm_sq() > inner_sq {
                let slot = ((s.r + extent) as usize) * width + (s.q + extent) as usize;
                lookup[slot] = sites.len() as u32;
                sites.push(s);
            }
        }
        let mut a = Annulus {
            inner: n,
            outer,
            neighbors: Vec::with_capacity(sites.len()),
            inner_flag: vec![false; sites.len()],
            outer_flag: vec![false; sites.len()],
            inner_boundary: Vec::new(),
            outer_boundary: Vec::new(),
            sites,
            extent,
            lookup,
        };
        for i in 0..a.sites.len() {
            let s = a.sites[i];
            let mut slots = [NO_SITE; 6];
            for (d, slot) in slots.iter_mut().enumerate() {
                let t = s.neighbor(d);
                if t.in_disc(n) {
                    a.inner_flag[i] = true;
                } else if !t.in_disc(outer) {
                    a.outer_flag[i] = true;
                } else {
                    *slot = a.lookup_raw(t);
                }
            }
            a.neighbors.push(slots);
            if a.inner_flag[i] {
                a.inner_boundary.push(i as u32);
            }
            if a.outer_flag[i] {
                a.outer_boundary.push(i as u32);
            }
        }
        Ok(a)
    }

    fn lookup_raw(&self, s: Site) -> u32 {
        let e = self.extent;
        if s.q < -e || s.q > e || s.r < -e || s.r > e {
            return NO_SITE;
        }
        let width = (2 * e + 1) as usize;
        self.lookup[((s.r + e) as usize) * width + (s.q + e) as usize]
    }

    pub fn inner_radius(&self) -> u32 {
        self.inner
    }

    pub fn outer_radius(&self) -> u32 {
        self.outer
    }

    pub fn len(&self) -> usize {
        self.sites.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sites.is_empty()
    }

    pub fn sites(&self) -> &[Site] {
        &self.sites
    }

    pub fn site(&self, idx: usize) -> Site {
        self.sites[idx]
    }

    pub fn index_of(&self, s: Site) -> Option<usize> {
        match self.lookup_raw(s) {
            NO_SITE => None,
            i => Some(i as usize),
        }
    }

    pub fn contains(&self, s: Site) -> bool {
        self.index_of(s).is_some()
    }

    /// Neighbour slots by direction; [`NO_SITE`] where the neighbour is outside the annulus.
    #[inline]
    pub fn neighbor_slots(&self, idx: usize) -> &[u32; 6] {
        &self.neighbors[idx]
    }

    /// Indices of in-annulus neighbours, in direction order.
    pub fn neighbor_indices(&self, idx: usize) -> impl Iterator<Item = usize> + '_ {
        self.neighbors[idx]
            .iter()
            .filter(|&&t| t != NO_SITE)
            .map(|&t| t as usize)
    }

    /// The lattice neighbours of `s` that lie in the annulus, in direction order.
    pub fn neighbors(&self, s: Site) -> Result<Vec<Site>> {
        let idx = self
            .index_of(s)
            .ok_or_else(|| Error::domain(format!("site {s} is not in the annulus")))?;
        Ok(self.neighbor_indices(idx).map(|t| self.sites[t]).collect())
    }

    /// Whether the site touches `S_n` (belongs to `∂^e S_n`).
    #[inline]
    pub fn is_inner(&self, idx: usize) -> bool {
        self.inner_flag[idx]
    }

    /// Whether the site touches the complement of `S_N` (belongs to `∂^i S_N`).
    #[inline]
    pub fn is_outer(&self, idx: usize) -> bool {
        self.outer_flag[idx]
    }

    pub fn inner_boundary(&self) -> &[u32] {
        &self.inner_boundary
    }

    pub fn outer_boundary(&self) -> &[u32] {
        &self.outer_boundary
    }

    /// Sites on the positive real ray (`r = 0`, `q > 0`), innermost first.
    /// Every circuit of annulus sites around the hole passes through one of them.
    pub fn cut_sites(&self) -> Vec<usize> {
        let mut v: Vec<usize> = (1..=self.outer as i32 + 1)
            .filter_map(|q| self.index_of(Site::new(q, 0)))
            .collect();
        v.sort_by_key(|&i| self.sites[i].q);
        v
    }

    /// Sites of the radial chain along the positive real ray, inner to outer.
    pub fn radial_chain(&self) -> Vec<usize> {
        self.cut_sites()
    }
}
