//! Reproducible site configurations.
//!
//! Colours come from the Philox4x64-10 counter-based generator keyed by
//! `(master seed, stream index)`; site `i` reads word `i % 4` of the block at
//! counter `i / 4`. A configuration therefore depends only on the annulus, the
//! probability and the [`SeedSpec`], never on evaluation order, which lets the
//! Monte Carlo drivers evaluate colours lazily and split work across threads.

use std::cell::Cell;
use std::fmt;

use rand_core::{impls, Error as RandError, RngCore};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::Annulus;

const PHILOX_M0: u64 = 0xD2E7_470E_E14C_6C93;
const PHILOX_M1: u64 = 0xCA5A_8263_9512_1157;
const PHILOX_W0: u64 = 0x9E37_79B9_7F4A_7C15;
const PHILOX_W1: u64 = 0xBB67_AE85_84CA_A73B;

#[inline(always)]
fn mulhilo(a: u64, b: u64) -> (u64, u64) {
    let p = (a as u128) * (b as u128);
    ((p >> 64) as u64, p as u64)
}

/// Philox4x64 with 10 rounds.
#[inline]
pub fn philox4x64_10(counter: [u64; 4], key: [u64; 2]) -> [u64; 4] {
    let mut c = counter;
    let mut k = key;
    for round in 0..10 {
        if round > 0 {
            k[0] = k[0].wrapping_add(PHILOX_W0);
            k[1] = k[1].wrapping_add(PHILOX_W1);
        }
        let (hi0, lo0) = mulhilo(PHILOX_M0, c[0]);
        let (hi1, lo1) = mulhilo(PHILOX_M1, c[2]);
        c = [hi1 ^ c[1] ^ k[0], lo1, hi0 ^ c[3] ^ k[1], lo0];
    }
    c
}

/// `(master seed, stream index)`; serialized as two decimal integers.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SeedSpec {
    pub seed: u64,
    pub stream: u64,
}

impl SeedSpec {
    pub const fn new(seed: u64, stream: u64) -> Self {
        SeedSpec { seed, stream }
    }

    pub fn with_stream(self, stream: u64) -> Self {
        SeedSpec { stream, ..self }
    }

    /// Stream `offset` positions further along.
    pub fn offset(self, offset: u64) -> Self {
        self.with_stream(self.stream.wrapping_add(offset))
    }

    fn key(self) -> [u64; 2] {
        [self.seed, self.stream]
    }
}

impl fmt::Display for SeedSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {}", self.seed, self.stream)
    }
}

impl std::str::FromStr for SeedSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let mut it = s.split_whitespace();
        let parse = |t: Option<&str>| -> Result<u64> {
            t.ok_or_else(|| Error::domain("seed spec needs two integers"))?
                .parse::<u64>()
                .map_err(|e| Error::domain(format!("bad seed integer: {e}")))
        };
        let seed = parse(it.next())?;
        let stream = parse(it.next())?;
        if it.next().is_some() {
            return Err(Error::domain("seed spec has trailing data"));
        }
        Ok(SeedSpec { seed, stream })
    }
}

/// General-purpose generator on a Philox stream, disjoint from the site-colour
/// counters (the second counter word is fixed to 1).
#[derive(Clone, Debug)]
pub struct PhiloxRng {
    key: [u64; 2],
    counter: u64,
    buf: [u64; 4],
    pos: usize,
}

impl PhiloxRng {
    pub fn new(seed: SeedSpec) -> Self {
        PhiloxRng {
            key: seed.key(),
            counter: 0,
            buf: [0; 4],
            pos: 4,
        }
    }
}

impl RngCore for PhiloxRng {
    fn next_u32(&mut self) -> u32 {
        (self.next_u64() >> 32) as u32
    }

    fn next_u64(&mut self) -> u64 {
        if self.pos == 4 {
            self.buf = philox4x64_10([self.counter, 1, 0, 0], self.key);
            self.counter += 1;
            self.pos = 0;
        }
        let v = self.buf[self.pos];
        self.pos += 1;
        v
    }

    fn fill_bytes(&mut self, dest: &mut [u8]) {
        impls::fill_bytes_via_next(self, dest)
    }

    fn try_fill_bytes(&mut self, dest: &mut [u8]) -> std::result::Result<(), RandError> {
        self.fill_bytes(dest);
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Color {
    Black,
    White,
}

impl Color {
    pub fn opposite(self) -> Color {
        match self {
            Color::Black => Color::White,
            Color::White => Color::Black,
        }
    }
}

/// Read access to the colours of an annulus configuration.
pub trait Coloring {
    fn annulus(&self) -> &Annulus;

    fn is_black(&self, idx: usize) -> bool;

    #[inline]
    fn has_color(&self, idx: usize, color: Color) -> bool {
        self.is_black(idx) == (color == Color::Black)
    }

    fn color(&self, idx: usize) -> Color {
        if self.is_black(idx) {
            Color::Black
        } else {
            Color::White
        }
    }
}

impl<C: Coloring + ?Sized> Coloring for &C {
    fn annulus(&self) -> &Annulus {
        (**self).annulus()
    }

    #[inline]
    fn is_black(&self, idx: usize) -> bool {
        (**self).is_black(idx)
    }
}

/// Threshold such that a uniform 64-bit word `w` is black iff `w < t`;
/// `None` means every site is black.
fn black_threshold(p: f64) -> Result<Option<u64>> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::domain(format!("probability {p} outside [0, 1]")));
    }
    if p >= 1.0 {
        return Ok(None);
    }
    Ok(Some((p * 18_446_744_073_709_551_616.0) as u64))
}

#[inline]
fn block_bits(key: [u64; 2], block: usize, threshold: Option<u64>) -> u8 {
    let Some(t) = threshold else { return 0b1111 };
    let w = philox4x64_10([block as u64, 0, 0, 0], key);
    (w[0] < t) as u8 | ((w[1] < t) as u8) << 1 | ((w[2] < t) as u8) << 2 | ((w[3] < t) as u8) << 3
}

/// One colour per annulus site, in annulus index order (`true` = black).
#[derive(Clone, PartialEq, Eq)]
pub struct SiteConfig<'a> {
    annulus: &'a Annulus,
    colors: Vec<bool>,
}

impl fmt::Debug for SiteConfig<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s: String = self.colors.iter().map(|&b| if b { '1' } else { '0' }).collect();
        f.debug_struct("SiteConfig").field("annulus", self.annulus).field("colors", &s).finish()
    }
}

impl<'a> SiteConfig<'a> {
    pub fn from_colors(annulus: &'a Annulus, colors: Vec<bool>) -> Result<Self> {
        if colors.len() != annulus.len() {
            return Err(Error::domain(format!(
                "{} colours for an annulus of {} sites",
                colors.len(),
                annulus.len()
            )));
        }
        Ok(SiteConfig { annulus, colors })
    }

    pub fn uniform(annulus: &'a Annulus, color: Color) -> Self {
        SiteConfig {
            annulus,
            colors: vec![color == Color::Black; annulus.len()],
        }
    }

    /// Bit `i` of `bits` gives the colour of site `i`. Requires at most 64 sites.
    pub fn from_bits(annulus: &'a Annulus, bits: u64) -> Result<Self> {
        if annulus.len() > 64 {
            return Err(Error::Capacity(format!("{} sites do not fit a 64-bit mask", annulus.len())));
        }
        let colors = (0..annulus.len()).map(|i| bits >> i & 1 == 1).collect();
        Ok(SiteConfig { annulus, colors })
    }

    pub fn colors(&self) -> &[bool] {
        &self.colors
    }

    pub fn set(&mut self, idx: usize, color: Color) {
        self.colors[idx] = color == Color::Black;
    }

    pub fn black_count(&self) -> usize {
        self.colors.iter().filter(|&&b| b).count()
    }

    pub fn flipped(&self) -> Self {
        flip_config(self)
    }
}

impl Coloring for SiteConfig<'_> {
    fn annulus(&self) -> &Annulus {
        self.annulus
    }

    #[inline]
    fn is_black(&self, idx: usize) -> bool {
        self.colors[idx]
    }
}

/// Each site black independently with probability `p`.
pub fn sample_config<'a>(annulus: &'a Annulus, p: f64, seed: SeedSpec) -> Result<SiteConfig<'a>> {
    let threshold = black_threshold(p)?;
    let key = seed.key();
    let n = annulus.len();
    let mut colors = Vec::with_capacity(n);
    for block in 0..n.div_ceil(4) {
        let bits = block_bits(key, block, threshold);
        for k in 0..4 {
            if colors.len() < n {
                colors.push(bits >> k & 1 == 1);
            }
        }
    }
    Ok(SiteConfig { annulus, colors })
}

/// Invert every colour.
pub fn flip_config<'a>(c: &SiteConfig<'a>) -> SiteConfig<'a> {
    SiteConfig {
        annulus: c.annulus,
        colors: c.colors.iter().map(|&b| !b).collect(),
    }
}

/// The same configuration as [`sample_config`], with colours generated on first
/// access. One instance is reused across samples via [`LazyConfig::reset`].
pub struct LazyConfig<'a> {
    annulus: &'a Annulus,
    threshold: Option<u64>,
    key: Cell<[u64; 2]>,
    flip: bool,
    /// Current sample number, kept below 2^28.
    epoch: Cell<u32>,
    /// Per block of four sites: `epoch << 4 | colour bits` of the last fill.
    cache: Vec<Cell<u32>>,
}

const EPOCH_LIMIT: u32 = 1 << 28;

impl<'a> LazyConfig<'a> {
    pub fn new(annulus: &'a Annulus, p: f64, seed: SeedSpec) -> Result<Self> {
        let blocks = annulus.len().div_ceil(4);
        Ok(LazyConfig {
            annulus,
            threshold: black_threshold(p)?,
            key: Cell::new(seed.key()),
            flip: false,
            epoch: Cell::new(1),
            cache: (0..blocks).map(|_| Cell::new(0)).collect(),
        })
    }

    /// Same configurations with every colour inverted.
    pub fn flipped(mut self) -> Self {
        self.flip = !self.flip;
        self
    }

    /// Switch to another seed; previously generated colours are discarded.
    pub fn reset(&mut self, seed: SeedSpec) {
        self.key.set(seed.key());
        let e = self.epoch.get() + 1;
        if e == EPOCH_LIMIT {
            for s in &self.cache {
                s.set(0);
            }
            self.epoch.set(1);
        } else {
            self.epoch.set(e);
        }
    }

    pub fn materialize(&self) -> SiteConfig<'a> {
        let colors = (0..self.annulus.len()).map(|i| self.is_black(i)).collect();
        SiteConfig {
            annulus: self.annulus,
            colors,
        }
    }
}

impl Coloring for LazyConfig<'_> {
    fn annulus(&self) -> &Annulus {
        self.annulus
    }

    #[inline]
    fn is_black(&self, idx: usize) -> bool {
        let block = idx >> 2;
        let epoch = self.epoch.get();
        let cached = self.cache[block].get();
        let bits = if cached >> 4 == epoch {
            cached as u8 & 0xf
        } else {
            let b = block_bits(self.key.get(), block, self.threshold);
            self.cache[block].set(epoch << 4 | b as u32);
            b
        };
        (bits >> (idx & 3) & 1 == 1) != self.flip
    }
}
