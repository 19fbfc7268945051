mod common;

use clustkit::prototype::{
    minibatch_kmeans_fit, CovarianceType, FuzzyParams, GmmParams, KMeansParams, MiniBatchConfig,
};
use common::{blobs, rows, table};
use nalgebra::{DMatrix, SymmetricEigen};
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn lloyd_trace_never_increases(r in rows(4..=40, 1..=3), k in 1usize..=4, seed in any::<u64>()) {
        let t = table(r);
        let k = k.min(t.n_rows());
        let m = KMeansParams::new(k).with_seed(seed).with_restarts(3).fit(&t).unwrap();
        for w in m.inertia_trace.windows(2) {
            prop_assert!(w[1] <= w[0] * (1.0 + 1e-12) + 1e-12, "{:?}", m.inertia_trace);
        }
        prop_assert_eq!(*m.inertia_trace.last().unwrap(), m.inertia);
    }

    #[test]
    fn fuzzy_memberships_sum_to_one(r in rows(4..=40, 1..=3), c in 2usize..=4, seed in any::<u64>()) {
        let t = table(r);
        let c = c.min(t.n_rows());
        let m = FuzzyParams { seed, ..FuzzyParams::new(c) }.fit(&t).unwrap();
        for row in &m.membership {
            prop_assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-8);
            prop_assert!(row.iter().all(|&u| (0.0..=1.0).contains(&u)));
        }
    }

    #[test]
    fn gmm_weights_and_covariance_floor(
        seed in any::<u64>(),
        k in 1usize..=3,
        ct in prop::sample::select(CovarianceType::ALL.to_vec()),
    ) {
        let t = table(blobs(seed, 60, 3));
        let m = GmmParams { covariance_type: ct, seed, ..GmmParams::new(k) }.fit(&t).unwrap();
        prop_assert!((m.weights.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        for cov in &m.covariances {
            let d = cov.len();
            let mat = DMatrix::from_fn(d, d, |i, j| cov[i][j]);
            let eig = SymmetricEigen::new(mat);
            for &e in eig.eigenvalues.iter() {
                prop_assert!(e >= m.reg_floor * (1.0 - 1e-12), "eigenvalue {e}");
            }
        }
    }
}

#[test]
fn all_fitters_are_deterministic() {
    let t = table(blobs(5, 90, 3));
    let km = || KMeansParams::new(3).with_seed(9).fit(&t).unwrap();
    assert_eq!(km(), km());
    let mb = || {
        let mut c = MiniBatchConfig::new(3, t.n_rows());
        c.seed = 9;
        minibatch_kmeans_fit(&t, &c).unwrap()
    };
    assert_eq!(mb(), mb());
    let fz = || FuzzyParams { seed: 9, ..FuzzyParams::new(3) }.fit(&t).unwrap();
    assert_eq!(fz(), fz());
    let gm = || GmmParams { seed: 9, ..GmmParams::new(3) }.fit(&t).unwrap();
    assert_eq!(gm(), gm());
}
