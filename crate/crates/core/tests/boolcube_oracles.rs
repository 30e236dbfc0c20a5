use percolab::boolcube::*;
use percolab::sample::{PhiloxRng, SeedSpec};
use percolab::Error;
use proptest::prelude::*;
use rand::Rng;

/// `A ∘ B` straight from the definition: some `S` whose cylinder through
/// `ω` lies in `A` while the cylinder on the complement lies in `B`.
fn brute_occurrence(a: &CubeEvent, b: &CubeEvent) -> Vec<u32> {
    let n = a.dim();
    let all = 1u32 << n;
    let cyl_in = |e: &CubeEvent, w: u32, s: u32| (0..all).filter(|t| (t ^ w) & s == 0).all(|t| e.contains(t));
    (0..all)
        .filter(|&w| (0..all).any(|s| cyl_in(a, w, s) && cyl_in(b, w, !s & (all - 1))))
        .collect()
}

fn random_event(n: u32, rng: &mut PhiloxRng) -> CubeEvent {
    let density = rng.gen::<f64>();
    CubeEvent::from_fn(n, |_| rng.gen::<f64>() < density).unwrap()
}

/// Up-closure of a few random configurations.
fn random_increasing(n: u32, rng: &mut PhiloxRng) -> CubeEvent {
    let gens: Vec<u32> = (0..rng.gen_range(0..4)).map(|_| rng.gen_range(0..1u32 << n)).collect();
    CubeEvent::from_fn(n, |w| gens.iter().any(|g| w & g == *g)).unwrap()
}

#[test]
fn fixture_pairs() {
    let text = include_str!("fixtures/reimer_pairs.txt");
    let mut rows = 0;
    for line in text.lines().filter(|l| !l.starts_with('#') && !l.trim().is_empty()) {
        let f: Vec<&str> = line.split_whitespace().collect();
        let n: u32 = f[0].parse().unwrap();
        let a = CubeEvent::from_hex(n, f[1]).unwrap();
        let b = CubeEvent::from_hex(n, f[2]).unwrap();
        let r = check_reimer(&a, &b).unwrap();
        assert_eq!((r.lhs, r.rhs), (f[3].parse().unwrap(), f[4].parse().unwrap()), "{line}");
        assert_eq!(brute_occurrence(&a, &b).len() as u64, r.lhs);
        rows += 1;
    }
    assert_eq!(rows, 7);
}

#[test]
fn disjoint_occurrence_examples() {
    let full = CubeEvent::full(3).unwrap();
    assert_eq!(disjoint_occurrence(&full, &full).unwrap(), full);
    let one = CubeEvent::coordinate(1, 1).unwrap();
    assert_eq!(disjoint_occurrence(&one, &one).unwrap().count(), 0);
    let a = CubeEvent::coordinate(2, 1).unwrap();
    let b = CubeEvent::coordinate(2, 2).unwrap();
    let ab = disjoint_occurrence(&a, &b).unwrap();
    assert_eq!(ab.members().collect::<Vec<_>>(), vec![3]);
    assert_eq!(occurrence_witness(&a, &b, 3).unwrap(), Some(0b01));
    assert!(matches!(disjoint_occurrence(&a, &one), Err(Error::Domain(_))));
    let big = CubeEvent::full(15).unwrap();
    assert!(matches!(disjoint_occurrence(&big, &big), Err(Error::Capacity(_))));
    assert!(matches!(CubeEvent::empty(21), Err(Error::Capacity(_))));
}

#[test]
fn flip_examples() {
    let full = CubeEvent::full(4).unwrap();
    assert_eq!(flip_event(&full), full);
    let top = CubeEvent::from_fn(4, |w| w == 15).unwrap();
    assert_eq!(flip_event(&top).members().collect::<Vec<_>>(), vec![0]);
}

#[test]
fn reimer_bk_harris_examples() {
    let full = CubeEvent::full(3).unwrap();
    let r = check_reimer(&full, &full).unwrap();
    assert_eq!((r.lhs, r.rhs, r.holds), (8, 8, true));
    let one = CubeEvent::coordinate(1, 1).unwrap();
    let r = check_reimer(&one, &one).unwrap();
    assert_eq!((r.lhs, r.rhs), (0, 0));

    let bk = check_bk(&full, &full).unwrap();
    assert_eq!(bk.lhs, bk.rhs);
    let a = CubeEvent::coordinate(2, 1).unwrap();
    let b = CubeEvent::coordinate(2, 2).unwrap();
    let bk = check_bk(&a, &b).unwrap();
    assert_eq!((bk.lhs, bk.rhs), (4, 4));

    let h = check_harris(&full, &full).unwrap();
    assert_eq!(h.lhs, h.rhs);
    let down = flip_event(&a);
    let h = check_harris(&a, &down).unwrap();
    assert_eq!((h.lhs, h.rhs, h.holds), (0, 4, true));
    match check_harris(&down, &down) {
        Err(Error::Precondition(msg)) => assert!(msg.contains("coordinate 1"), "{msg}"),
        other => panic!("{other:?}"),
    }
    match check_harris(&a, &a) {
        Err(Error::Precondition(msg)) => assert!(msg.starts_with("B is not decreasing"), "{msg}"),
        other => panic!("{other:?}"),
    }
}

#[test]
fn random_monotone_pairs() {
    let mut rng = PhiloxRng::new(SeedSpec::new(12, 0));
    for _ in 0..10_000 {
        let a = random_increasing(4, &mut rng);
        let b = random_increasing(4, &mut rng);
        assert!(a.is_increasing() && b.is_increasing());
        assert!(check_bk(&a, &b).unwrap().holds);
        let c = random_increasing(5, &mut rng);
        let d = flip_event(&random_increasing(5, &mut rng));
        assert!(d.is_decreasing());
        assert!(check_harris(&c, &d).unwrap().holds);
    }
}

#[test]
fn interiors_agree_with_the_definition() {
    let mut rng = PhiloxRng::new(SeedSpec::new(13, 0));
    for n in 1..=5 {
        for _ in 0..40 {
            let a = random_event(n, &mut rng);
            let b = random_event(n, &mut rng);
            let fast: Vec<u32> = disjoint_occurrence(&a, &b).unwrap().members().collect();
            assert_eq!(fast, brute_occurrence(&a, &b));
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn occurrence_is_inside_both_events(seed in any::<u64>(), n in 1u32..=7) {
        let mut rng = PhiloxRng::new(SeedSpec::new(seed, 0));
        let a = random_event(n, &mut rng);
        let b = random_event(n, &mut rng);
        let ab = disjoint_occurrence(&a, &b).unwrap();
        prop_assert!(ab.is_subset(&a).unwrap() && ab.is_subset(&b).unwrap());
        prop_assert!(check_reimer(&a, &b).unwrap().holds);
        let f = flip_event(&a);
        prop_assert_eq!(f.count(), a.count());
        prop_assert_eq!(flip_event(&f), a);
    }

    /// Events on complementary coordinate sets occur disjointly exactly
    /// when both occur.
    #[test]
    fn disjoint_supports_give_intersection(seed in any::<u64>(), n in 2u32..=8, split in 1u32..8) {
        let split = split.min(n - 1);
        let mut rng = PhiloxRng::new(SeedSpec::new(seed, 1));
        let low_mask = (1u32 << split) - 1;
        let ta: Vec<bool> = (0..1 << split).map(|_| rng.gen()).collect();
        let tb: Vec<bool> = (0..1 << (n - split)).map(|_| rng.gen()).collect();
        let a = CubeEvent::from_fn(n, |w| ta[(w & low_mask) as usize]).unwrap();
        let b = CubeEvent::from_fn(n, |w| tb[(w >> split) as usize]).unwrap();
        prop_assert_eq!(disjoint_occurrence(&a, &b).unwrap(), a.intersection(&b).unwrap());
    }

    #[test]
    fn hex_round_trip(seed in any::<u64>(), n in 0u32..=9) {
        let mut rng = PhiloxRng::new(SeedSpec::new(seed, 2));
        let a = random_event(n, &mut rng);
        prop_assert_eq!(CubeEvent::from_hex(n, &a.to_hex()).unwrap(), a);
    }
}
