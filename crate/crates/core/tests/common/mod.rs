#![allow(dead_code)]

use clustkit::FeatureTable;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn table(rows: Vec<Vec<f64>>) -> FeatureTable {
    FeatureTable::from_rows(rows).unwrap()
}

/// `n × d` rows with coordinates in `[-10, 10)`.
pub fn rows(n: std::ops::RangeInclusive<usize>, d: std::ops::RangeInclusive<usize>) -> impl Strategy<Value = Vec<Vec<f64>>> {
    (n, d).prop_flat_map(|(n, d)| proptest::collection::vec(proptest::collection::vec(-10.0f64..10.0, d), n))
}

/// Points scattered around `centres` blob centres in the plane.
pub fn blobs(seed: u64, n: usize, centres: usize) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let c: Vec<(f64, f64)> = (0..centres)
        .map(|_| (rng.random::<f64>() * 30.0, rng.random::<f64>() * 30.0))
        .collect();
    (0..n)
        .map(|i| {
            let (x, y) = c[i % centres];
            vec![x + 3.0 * rng.random::<f64>(), y + 3.0 * rng.random::<f64>()]
        })
        .collect()
}

/// Same-cluster relation, noise rows excluded, as sorted groups.
pub fn groups(labels: &[i32]) -> Vec<Vec<usize>> {
    let mut m = std::collections::BTreeMap::<i32, Vec<usize>>::new();
    for (i, &l) in labels.iter().enumerate().filter(|p| *p.1 >= 0) {
        m.entry(l).or_default().push(i);
    }
    let mut v: Vec<_> = m.into_values().collect();
    v.sort();
    v
}

pub fn permutation(n: usize, seed: u64) -> Vec<usize> {
    use rand::seq::SliceRandom;
    let mut p: Vec<usize> = (0..n).collect();
    p.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    p
}
