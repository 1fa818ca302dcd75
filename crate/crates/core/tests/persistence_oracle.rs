mod common;

use common::*;
use proptest::prelude::*;
use topopi::{
    betti_numbers, compute_persistence, persistence_dim0_unionfind, FiltrationField, SegMap,
};

#[test]
fn oracle_ring() {
    // Ring of value 1 around a centre of value 5, outer frame of value 10.
    let mut v = vec![10.0; 25];
    for y in 1..4 {
        for x in 1..4 {
            v[y * 5 + x] = if (x, y) == (2, 2) { 5.0 } else { 1.0 };
        }
    }
    assert_eq!(
        oracle_persistence(5, 5, &v, 20.0),
        vec![(0, 1.0, 20.0), (1, 1.0, 5.0)]
    );
}

#[test]
fn oracle_two_basins() {
    let v = vec![1.0, 9.0, 2.0];
    assert_eq!(
        oracle_persistence(3, 1, &v, 20.0),
        vec![(0, 1.0, 20.0), (0, 2.0, 9.0)]
    );
    assert_eq!(oracle_persistence(1, 1, &[20.0], 20.0), vec![]);
}

#[test]
fn oracle_diagonal_pixels_touch() {
    let v = vec![0.0, 7.0, 7.0, 0.0];
    assert_eq!(oracle_persistence(2, 2, &v, 20.0), vec![(0, 0.0, 20.0)]);
}

#[test]
fn flood_fill_oracle_examples() {
    let ring: Vec<bool> = (0..25)
        .map(|i| {
            let (x, y) = (i % 5, i / 5);
            (1..4).contains(&x) && (1..4).contains(&y) && (x, y) != (2, 2)
        })
        .collect();
    assert_eq!(flood_betti(5, 5, &ring), (1, 1));
    let diagonal = vec![true, false, false, true];
    assert_eq!(flood_betti(2, 2, &diagonal), (1, 0));
    // 4-connected background only: the corner gap does not leak.
    let mut diamond = vec![false; 25];
    for (x, y) in [(2, 1), (1, 2), (3, 2), (2, 3)] {
        diamond[y * 5 + x] = true;
    }
    assert_eq!(flood_betti(5, 5, &diamond), (1, 1));
}

fn field_strategy() -> impl Strategy<Value = (usize, usize, Vec<f64>)> {
    (1usize..=16, 1usize..=16).prop_flat_map(|(w, h)| {
        let values = prop::collection::vec(
            prop_oneof![(0u8..6).prop_map(|k| k as f64 * 3.0), 0.0f64..20.0],
            w * h,
        );
        (Just(w), Just(h), values)
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn cubical_matches_oracle((w, h, v) in field_strategy()) {
        let field = FiltrationField::from_values(w, h, v.clone(), 20.0).unwrap();
        let expected = oracle_persistence(w, h, &v, 20.0);
        prop_assert_eq!(library_bars(&compute_persistence(&field)), expected.clone());
        let dim0: Vec<RawBar> = expected.into_iter().filter(|b| b.0 == 0).collect();
        prop_assert_eq!(library_bars(&persistence_dim0_unionfind(&field)), dim0);
    }

    #[test]
    fn betti_matches_flood_fill(w in 1usize..40, h in 1usize..40, seed in any::<u64>()) {
        let mut r = rng(seed);
        let mask: Vec<bool> = (0..w * h).map(|_| rand::Rng::random_bool(&mut r, 0.5)).collect();
        let map = SegMap::new(w, h, mask.iter().map(|&b| b as u8).collect(), "").unwrap();
        let b = betti_numbers(&map);
        prop_assert_eq!((b.b0, b.b1), flood_betti(w, h, &mask));
    }
}
