mod common;

use std::f64::consts::PI;

use common::{sheet_of, simple_crossings};
use percolab::lattice::{build_annulus, Annulus};
use percolab::sample::{sample_config, Color, SeedSpec};
use percolab::winding::*;
use proptest::prelude::*;

const TWO_PI: f64 = 2.0 * PI;

#[test]
fn cover_sheets_contain_every_simple_crossing() {
    let mut violations = 0;
    let mut crossings = 0;
    let annuli: Vec<Annulus> = [(1, 3), (0, 2), (2, 3)].iter().map(|&(n, m)| build_annulus(n, m).unwrap()).collect();
    for a in &annuli {
        assert!(a.len() <= 30);
    }
    for i in 0..1000u64 {
        let a = &annuli[(i % 3) as usize];
        let p = 0.35 + 0.4 * ((i * 37) % 100) as f64 / 100.0;
        let c = sample_config(a, p, SeedSpec::new(2718, i)).unwrap();
        for color in [Color::Black, Color::White] {
            let sheets = single_arm_winding_sheets(&c, color, 8.0 * TWO_PI).unwrap();
            let found = simple_crossings(&c, color);
            crossings += found.len();
            violations += found.iter().filter(|&&x| !sheets.contains(&sheet_of(a, x))).count();
            assert_eq!(sheets.is_empty(), found.is_empty());
        }
    }
    assert!(crossings > 10_000, "only {crossings} crossings enumerated");
    assert_eq!(violations, 0);
}

#[test]
fn opposite_colors_wind_within_two_pi() {
    let mut pairs = 0u64;
    for (n, m) in [(1, 3), (2, 4), (0, 2)] {
        let a = build_annulus(n, m).unwrap();
        for i in 0..300u64 {
            let c = sample_config(&a, 0.5, SeedSpec::new(31, i)).unwrap();
            let black = simple_crossings(&c, Color::Black);
            let white = simple_crossings(&c, Color::White);
            for b in &black {
                for w in &white {
                    pairs += 1;
                    assert!((b.2 - w.2).abs() < TWO_PI, "black {} white {}", b.2, w.2);
                }
            }
            if !black.is_empty() && !white.is_empty() {
                // Each arm is within 2 pi of every arm of the other color, so
                // the family windings span less than 4 pi.
                let fam = poly_family_windings(&c, 2, 1 << 20).unwrap();
                assert_eq!(fam.len(), black.len() + white.len());
                let est = complete_interval(&fam);
                assert!(est.is_interval());
                assert!(est.length() < 6.0 * PI, "{est:?}");
            }
        }
    }
    assert!(pairs > 1000, "only {pairs} pairs");
}

/// Two same-colored arms taken from different families are not bound to lie
/// within 2 pi of each other, so the completion can exceed 4 pi.
#[test]
fn same_color_arms_can_spread_beyond_two_pi() {
    let a = build_annulus(1, 3).unwrap();
    let c = sample_config(&a, 0.5, SeedSpec::new(31, 14)).unwrap();
    let white = simple_crossings(&c, Color::White);
    let black = simple_crossings(&c, Color::Black);
    assert_eq!(white.len(), 1);
    let lo = black.iter().map(|x| x.2).fold(f64::MAX, f64::min);
    let hi = black.iter().map(|x| x.2).fold(f64::MIN, f64::max);
    assert!(hi - lo > TWO_PI);
    assert!(hi - white[0].2 < TWO_PI && white[0].2 - lo < TWO_PI);
    let est = complete_interval(&poly_family_windings(&c, 2, 1 << 20).unwrap());
    assert!(est.length() > 4.0 * PI);
}

#[test]
fn three_arm_families_are_subsets_of_crossings() {
    let a = build_annulus(2, 4).unwrap();
    for i in 0..200u64 {
        let c = sample_config(&a, 0.6, SeedSpec::new(5, i)).unwrap();
        let fam = poly_family_windings(&c, 3, 1 << 20).unwrap();
        let two = poly_family_windings(&c, 2, 1 << 20).unwrap();
        for w in &fam {
            assert!(two.iter().any(|x| (x - w).abs() < 1e-9));
        }
    }
}

#[test]
fn sheet_count_grows_with_aspect_ratio() {
    let report = sheet_growth(2, &[4, 8, 16, 32, 64], 300, 8.0 * TWO_PI, SeedSpec::new(17, 0)).unwrap();
    for w in report.points.windows(2) {
        assert!(
            w[1].mean_sheets >= w[0].mean_sheets - 3.0 * (w[0].stderr.hypot(w[1].stderr)),
            "{report:?}"
        );
    }
    assert!(report.positive, "{report:?}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn completion_covers_each_window(angles in prop::collection::vec(-20.0f64..20.0, 1..12)) {
        let est = complete_interval(&angles);
        for &x in &angles {
            prop_assert!(est.contains(x + PI) && est.contains(x - PI + 1e-6));
        }
        for w in est.components.windows(2) {
            prop_assert!(w[0].1 < w[1].0);
        }
        prop_assert!(est.length() <= TWO_PI * angles.len() as f64 + 1e-9);
    }

    #[test]
    fn reversal_negates_winding(seed in any::<u64>()) {
        let a = build_annulus(1, 3).unwrap();
        let c = sample_config(&a, 0.7, SeedSpec::new(seed, 0)).unwrap();
        for p in enumerate_simple_arms(&c, Color::Black, 1 << 16).unwrap() {
            prop_assert!((winding_angle(&p) + winding_angle(&p.reversed())).abs() < 1e-9);
        }
    }

    #[test]
    fn color_flip_swaps_sheet_sets(seed in any::<u64>(), outer in 4u32..12) {
        let a = build_annulus(2, outer).unwrap();
        let c = sample_config(&a, 0.5, SeedSpec::new(seed, 1)).unwrap();
        let f = c.flipped();
        prop_assert_eq!(
            single_arm_winding_sheets(&c, Color::Black, 4.0 * TWO_PI).unwrap(),
            single_arm_winding_sheets(&f, Color::White, 4.0 * TWO_PI).unwrap()
        );
    }
}
