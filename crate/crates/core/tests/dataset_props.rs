mod common;

use clustkit::dataset::{pca_fit_transform, percentile_rank, standardize, PcaTarget};
use common::{rows, table};
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn percentile_rank_is_order_preserving_and_equivariant(
        v in proptest::collection::vec(-50i32..50, 2..40),
        seed in any::<u64>(),
    ) {
        let v: Vec<f64> = v.into_iter().map(f64::from).collect();
        let r = percentile_rank(&v).unwrap();
        for i in 0..v.len() {
            prop_assert!((0.0..=1.0).contains(&r[i]));
            for j in 0..v.len() {
                if v[i] < v[j] {
                    prop_assert!(r[i] < r[j]);
                }
                if v[i] == v[j] {
                    prop_assert_eq!(r[i], r[j]);
                }
            }
        }
        let mut sorted = v.clone();
        sorted.sort_by(f64::total_cmp);
        if sorted.windows(2).all(|w| w[0] < w[1]) {
            let lo = v.iter().position(|&x| x == sorted[0]).unwrap();
            let hi = v.iter().position(|&x| x == *sorted.last().unwrap()).unwrap();
            prop_assert_eq!(r[lo], 0.0);
            prop_assert_eq!(r[hi], 1.0);
        }
        let p = common::permutation(v.len(), seed);
        let permuted: Vec<f64> = p.iter().map(|&i| v[i]).collect();
        let rp = percentile_rank(&permuted).unwrap();
        for (k, &i) in p.iter().enumerate() {
            prop_assert_eq!(rp[k], r[i]);
        }
    }

    #[test]
    fn standardize_round_trips(r in rows(2..=30, 1..=5)) {
        let t = table(r);
        let (s, params) = standardize(&t).unwrap();
        let back = params.invert(&s).unwrap();
        for (a, b) in t.values().iter().zip(back.values()) {
            prop_assert!((a - b).abs() <= 1e-10 * (1.0 + a.abs()));
        }
    }

    #[test]
    fn pca_is_orthonormal_and_reconstructs(r in rows(3..=30, 1..=5)) {
        let (s, _) = standardize(&table(r)).unwrap();
        let d = s.n_cols();
        let (scores, m) = pca_fit_transform(&s, PcaTarget::Components(d)).unwrap();
        for a in 0..d {
            for b in 0..d {
                let dot: f64 = m.components[a].iter().zip(&m.components[b]).map(|(x, y)| x * y).sum();
                let want = if a == b { 1.0 } else { 0.0 };
                prop_assert!((dot - want).abs() < 1e-8, "components {a},{b}: {dot}");
            }
        }
        prop_assert!(m.ratios.windows(2).all(|w| w[0] >= w[1] - 1e-12));
        prop_assert!((m.all_ratios.iter().sum::<f64>() - 1.0).abs() < 1e-8 || m.all_ratios.iter().all(|&x| x == 0.0));
        let back = m.reconstruct(&scores).unwrap();
        for (a, b) in s.values().iter().zip(back.values()) {
            prop_assert!((a - b).abs() < 1e-8);
        }
    }
}
