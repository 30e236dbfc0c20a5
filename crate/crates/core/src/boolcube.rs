//! Exact correlation inequalities on the hypercube `{0,1}^n`.
//!
//! A configuration is an integer whose bit `i` is coordinate `i + 1`. Events
//! are membership bitsets over all `2^n` configurations.

use std::fmt;

use crate::error::{Error, Result};

/// Largest dimension for which events are stored.
pub const MAX_DIM: u32 = 20;
/// Largest dimension for the witness search behind disjoint occurrence.
pub const MAX_OCCURRENCE_DIM: u32 = 14;

/// Within-word masks selecting the configurations with bit `i` clear.
const LOW: [u64; 6] = [
    0x5555_5555_5555_5555,
    0x3333_3333_3333_3333,
    0x0f0f_0f0f_0f0f_0f0f,
    0x00ff_00ff_00ff_00ff,
    0x0000_ffff_0000_ffff,
    0x0000_0000_ffff_ffff,
];

#[derive(Clone, PartialEq, Eq, Hash)]
pub struct CubeEvent {
    n: u32,
    words: Vec<u64>,
}

impl fmt::Debug for CubeEvent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "CubeEvent(n={}, {})", self.n, self.to_hex())
    }
}

fn check_dim(n: u32) -> Result<()> {
    if n > MAX_DIM {
        return Err(Error::Capacity(format!("dimension {n} exceeds {MAX_DIM}")));
    }
    Ok(())
}

impl CubeEvent {
    pub fn empty(n: u32) -> Result<Self> {
        check_dim(n)?;
        Ok(CubeEvent {
            n,
            words: vec![0; (1usize << n).div_ceil(64)],
        })
    }

    pub fn full(n: u32) -> Result<Self> {
        Self::from_fn(n, |_| true)
    }

    pub fn from_fn(n: u32, mut f: impl FnMut(u32) -> bool) -> Result<Self> {
        let mut e = Self::empty(n)?;
        for w in 0..e.size() {
            if f(w as u32) {
                e.words[w >> 6] |= 1 << (w & 63);
            }
        }
        Ok(e)
    }

    /// The cylinder `{ω : ω_i = 1}` for a 1-based coordinate `i`.
    pub fn coordinate(n: u32, i: u32) -> Result<Self> {
        if i == 0 || i > n {
            return Err(Error::domain(format!("coordinate {i} outside 1..={n}")));
        }
        Self::from_fn(n, |w| w >> (i - 1) & 1 == 1)
    }

    pub fn dim(&self) -> u32 {
        self.n
    }

    /// Number of configurations, `2^n`.
    pub fn size(&self) -> usize {
        1 << self.n
    }

    pub fn contains(&self, w: u32) -> bool {
        let w = w as usize;
        w < self.size() && self.words[w >> 6] >> (w & 63) & 1 == 1
    }

    pub fn count(&self) -> u64 {
        self.words.iter().map(|w| w.count_ones() as u64).sum()
    }

    pub fn members(&self) -> impl Iterator<Item = u32> + '_ {
        (0..self.size() as u32).filter(|&w| self.contains(w))
    }

    fn same_dim(&self, other: &CubeEvent) -> Result<()> {
        if self.n != other.n {
            return Err(Error::domain(format!("dimension mismatch: {} vs {}", self.n, other.n)));
        }
        Ok(())
    }

    pub fn intersection(&self, other: &CubeEvent) -> Result<CubeEvent> {
        self.same_dim(other)?;
        Ok(CubeEvent {
            n: self.n,
            words: self.words.iter().zip(&other.words).map(|(a, b)| a & b).collect(),
        })
    }

    pub fn is_subset(&self, other: &CubeEvent) -> Result<bool> {
        self.same_dim(other)?;
        Ok(self.words.iter().zip(&other.words).all(|(a, b)| a & !b == 0))
    }

    /// Image under `ω ↦ ω` with bit `i` (0-based) toggled.
    fn toggled(&self, i: u32) -> Vec<u64> {
        if i < 6 {
            let (m, s) = (LOW[i as usize], 1 << i);
            self.words.iter().map(|&w| ((w & m) << s) | ((w >> s) & m)).collect()
        } else {
            let b = 1usize << (i - 6);
            (0..self.words.len()).map(|k| self.words[k ^ b]).collect()
        }
    }

    /// First hypercube edge `(ω, ω + e_i)` along which membership drops, as
    /// `(ω, i)` with a 0-based `i`.
    fn first_drop(&self) -> Option<(u32, u32)> {
        for i in 0..self.n {
            for w in 0..self.size() as u32 {
                if w >> i & 1 == 0 && self.contains(w) && !self.contains(w | 1 << i) {
                    return Some((w, i));
                }
            }
        }
        None
    }

    pub fn is_increasing(&self) -> bool {
        self.first_drop().is_none()
    }

    pub fn is_decreasing(&self) -> bool {
        flip_event(self).is_increasing()
    }

    /// Membership as hexadecimal: the integer `Σ_{ω ∈ A} 2^ω`, most
    /// significant digit first, padded to `⌈2^n / 4⌉` digits.
    pub fn to_hex(&self) -> String {
        let digits = self.size().div_ceil(4);
        (0..digits)
            .rev()
            .map(|d| {
                let nib = (self.words[d / 16] >> (4 * (d % 16))) & 0xf;
                char::from_digit(nib as u32, 16).unwrap()
            })
            .collect()
    }

    pub fn from_hex(n: u32, hex: &str) -> Result<Self> {
        let mut e = Self::empty(n)?;
        let hex = hex.trim();
        let digits = e.size().div_ceil(4);
        if hex.len() != digits {
            return Err(Error::domain(format!("expected {digits} hex digits for n = {n}, got {}", hex.len())));
        }
        for (d, ch) in hex.chars().rev().enumerate() {
            let nib = ch.to_digit(16).ok_or_else(|| Error::domain(format!("bad hex digit `{ch}`")))? as u64;
            if (4 * d + 4 > e.size()) && nib >> (e.size() - 4 * d) != 0 {
                return Err(Error::domain("hex sets bits beyond 2^n"));
            }
            e.words[d / 16] |= nib << (4 * (d % 16));
        }
        Ok(e)
    }
}

/// `{ω̄ : ω ∈ A}` with `ω̄ = 1 − ω` coordinatewise.
pub fn flip_event(a: &CubeEvent) -> CubeEvent {
    let top = (a.size() - 1) as u32;
    CubeEvent::from_fn(a.n, |w| a.contains(top ^ w)).expect("same dimension")
}

/// For every `S ⊆ [n]`, the configurations `ω` with `[ω]_S ⊆ A`.
fn interiors(a: &CubeEvent) -> Vec<Vec<u64>> {
    let full = (1usize << a.n) - 1;
    let mut out: Vec<Vec<u64>> = vec![Vec::new(); full + 1];
    out[full] = a.words.clone();
    for s in (0..full).rev() {
        // Freeing coordinate i: both values must lie in the interior for S ∪ {i}.
        let i = (!s & full).trailing_zeros();
        let up = CubeEvent {
            n: a.n,
            words: std::mem::take(&mut out[s | 1 << i]),
        };
        let t = up.toggled(i);
        out[s] = up.words.iter().zip(&t).map(|(x, y)| x & y).collect();
        out[s | 1 << i] = up.words;
    }
    out
}

fn occurrence_inputs(a: &CubeEvent, b: &CubeEvent) -> Result<()> {
    a.same_dim(b)?;
    if a.n > MAX_OCCURRENCE_DIM {
        return Err(Error::Capacity(format!(
            "disjoint occurrence searches 2^n witness sets; n = {} exceeds {MAX_OCCURRENCE_DIM}",
            a.n
        )));
    }
    Ok(())
}

/// `A ∘ B`: configurations with a witness set `S` such that `[ω]_S ⊆ A` and
/// `[ω]_{S^c} ⊆ B`.
pub fn disjoint_occurrence(a: &CubeEvent, b: &CubeEvent) -> Result<CubeEvent> {
    occurrence_inputs(a, b)?;
    let (ia, ib) = (interiors(a), interiors(b));
    let full = a.size() - 1;
    let mut words = vec![0u64; a.words.len()];
    for s in 0..=full {
        for (k, w) in words.iter_mut().enumerate() {
            *w |= ia[s][k] & ib[full ^ s][k];
        }
    }
    Ok(CubeEvent { n: a.n, words })
}

/// Lexicographically first witness set for `ω ∈ A ∘ B`, as a bitmask of
/// 0-based coordinates.
pub fn occurrence_witness(a: &CubeEvent, b: &CubeEvent, w: u32) -> Result<Option<u32>> {
    occurrence_inputs(a, b)?;
    let full = (a.size() - 1) as u32;
    let forced = |e: &CubeEvent, s: u32| {
        let free = full & !s;
        // Enumerate the cylinder by walking the subsets of the free bits.
        let mut t = free;
        loop {
            if !e.contains((w & s) | t) {
                return false;
            }
            if t == 0 {
                return true;
            }
            t = (t - 1) & free;
        }
    };
    Ok((0..=full).find(|&s| forced(a, s) && forced(b, full & !s)))
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ReimerRecord {
    /// `|A ∘ B|`.
    pub lhs: u64,
    /// `|A ∩ B̄|`, which equals `|Ā ∩ B|`.
    pub rhs: u64,
    pub holds: bool,
}

pub fn check_reimer(a: &CubeEvent, b: &CubeEvent) -> Result<ReimerRecord> {
    let lhs = disjoint_occurrence(a, b)?.count();
    let rhs = a.intersection(&flip_event(b))?.count();
    let mirror = flip_event(a).intersection(b)?.count();
    assert_eq!(rhs, mirror, "flip is a bijection");
    Ok(ReimerRecord {
        lhs,
        rhs,
        holds: lhs <= rhs,
    })
}

/// Counting form of a product inequality: `lhs ≤ rhs` with both sides scaled
/// by `2^(2n)`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ProductRecord {
    pub lhs: u128,
    pub rhs: u128,
    pub holds: bool,
}

impl ProductRecord {
    fn new(lhs: u128, rhs: u128) -> Self {
        ProductRecord { lhs, rhs, holds: lhs <= rhs }
    }
}

/// `P(A ∘ B) ≤ P(A) P(B)`, i.e. `2^n |A ∘ B| ≤ |A| |B|`.
pub fn check_bk(a: &CubeEvent, b: &CubeEvent) -> Result<ProductRecord> {
    let ab = disjoint_occurrence(a, b)?.count() as u128;
    Ok(ProductRecord::new(ab << a.n, a.count() as u128 * b.count() as u128))
}

/// Harris for `A` increasing and `B` decreasing: `2^n |A ∩ B| ≤ |A| |B|`.
pub fn check_harris(a: &CubeEvent, b: &CubeEvent) -> Result<ProductRecord> {
    a.same_dim(b)?;
    if let Some((w, i)) = a.first_drop() {
        return Err(Error::precondition(format!(
            "A is not increasing: {w:0width$b} is in A but setting coordinate {} leaves it",
            i + 1,
            width = a.n.max(1) as usize
        )));
    }
    if let Some((w, i)) = flip_event(b).first_drop() {
        let top = (b.size() - 1) as u32;
        return Err(Error::precondition(format!(
            "B is not decreasing: {:0width$b} is in B but clearing coordinate {} leaves it",
            top ^ w,
            i + 1,
            width = b.n.max(1) as usize
        )));
    }
    let ab = a.intersection(b)?.count() as u128;
    Ok(ProductRecord::new(ab << a.n, a.count() as u128 * b.count() as u128))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn toggling_matches_xor() {
        for n in [3, 6, 8] {
            let a = CubeEvent::from_fn(n, |w| (w * 7 + 3) % 5 < 2).unwrap();
            for i in 0..n {
                let t = CubeEvent { n, words: a.toggled(i) };
                assert!((0..1u32 << n).all(|w| t.contains(w) == a.contains(w ^ 1 << i)));
            }
        }
    }

    #[test]
    fn hex_round_trip_and_layout() {
        let a = CubeEvent::coordinate(2, 1).unwrap();
        assert_eq!(a.to_hex(), "a");
        let b = CubeEvent::from_fn(7, |w| w % 3 == 0).unwrap();
        assert_eq!(CubeEvent::from_hex(7, &b.to_hex()).unwrap(), b);
        assert!(CubeEvent::from_hex(1, "4").is_err());
        assert!(CubeEvent::from_hex(2, "g").is_err());
        assert!(CubeEvent::from_hex(3, "fff").is_err());
    }

    #[test]
    fn witness_search_agrees_with_interiors() {
        let a = CubeEvent::from_fn(4, |w| w.count_ones() >= 2).unwrap();
        let b = CubeEvent::from_fn(4, |w| w & 0b1001 != 0).unwrap();
        let ab = disjoint_occurrence(&a, &b).unwrap();
        for w in 0..16 {
            assert_eq!(occurrence_witness(&a, &b, w).unwrap().is_some(), ab.contains(w));
        }
    }
}
