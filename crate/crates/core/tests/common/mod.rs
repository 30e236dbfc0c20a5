//! Independent oracles shared by several test targets.

use std::f64::consts::PI;

use percolab::lattice::Annulus;
use percolab::sample::{Color, Coloring, SiteConfig};

const TWO_PI: f64 = 2.0 * PI;

fn argument(a: &Annulus, v: usize) -> f64 {
    let (x, y) = a.site(v).position();
    y.atan2(x)
}

/// Winding of every simple crossing of `color`, with its endpoints, found by
/// plain depth-first search and summed with wrapped argument differences.
pub fn simple_crossings(c: &SiteConfig<'_>, color: Color) -> Vec<(usize, usize, f64)> {
    let a = c.annulus();
    let mut out = Vec::new();
    fn walk(c: &SiteConfig<'_>, color: Color, start: usize, v: usize, on: &mut [bool], wind: f64, out: &mut Vec<(usize, usize, f64)>) {
        let a = c.annulus();
        if a.is_outer(v) {
            out.push((start, v, wind));
            return;
        }
        for t in a.neighbor_indices(v) {
            if on[t] || c.color(t) != color {
                continue;
            }
            let mut d = argument(a, t) - argument(a, v);
            if d > PI {
                d -= TWO_PI;
            } else if d < -PI {
                d += TWO_PI;
            }
            on[t] = true;
            walk(c, color, start, t, on, wind + d, out);
            on[t] = false;
        }
    }
    let mut on = vec![false; a.len()];
    for &s in a.inner_boundary() {
        let s = s as usize;
        if c.color(s) == color {
            on[s] = true;
            walk(c, color, s, s, &mut on, 0.0, &mut out);
            on[s] = false;
        }
    }
    out
}

pub fn sheet_of(a: &Annulus, (start, end, wind): (usize, usize, f64)) -> i32 {
    let cut = |v: usize| argument(a, v).rem_euclid(TWO_PI);
    let k = (wind - (cut(end) - cut(start))) / TWO_PI;
    assert!((k - k.round()).abs() < 1e-6, "non-integral sheet {k}");
    k.round() as i32
}
