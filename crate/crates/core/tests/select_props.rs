mod common;

use clustkit::hierarchy::Linkage;
use clustkit::select::{grid_hierarchical, grid_optics, sweep_k, SweepMethod, SweepOptions};
use clustkit::Metric;
use common::{blobs, table};
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn hierarchical_grid_merges_and_reranks(seed in any::<u64>(), n in 12usize..=40) {
        let t = table(blobs(seed, n, 3));
        let before = t.clone();
        let ks: Vec<usize> = (2..=6).collect();
        let metrics = [Metric::Euclidean, Metric::Cityblock];
        let full = grid_hierarchical(&t, &Linkage::ALL, &metrics, &ks, 0.5).unwrap();
        prop_assert_eq!(&t, &before);
        prop_assert_eq!(full.rerank(), full.recommendation.clone());
        let (left, right) = Linkage::ALL.split_at(2);
        let a = grid_hierarchical(&t, left, &metrics, &ks, 0.5).unwrap();
        let b = grid_hierarchical(&t, right, &metrics, &ks, 0.5).unwrap();
        let merged = a.merge(&b).unwrap();
        prop_assert_eq!(&merged.rows, &full.rows);
        prop_assert_eq!(&merged.recommendation, &full.recommendation);
        let by_k = grid_hierarchical(&t, &Linkage::ALL, &metrics, &ks[..2], 0.5)
            .unwrap()
            .merge(&grid_hierarchical(&t, &Linkage::ALL, &metrics, &ks[2..], 0.5).unwrap())
            .unwrap();
        prop_assert_eq!(&by_k.rows, &full.rows);
        prop_assert_eq!(by_k.recommendation, full.recommendation);
    }

    #[test]
    fn density_grid_merges_by_metric(seed in any::<u64>()) {
        let t = table(blobs(seed, 60, 6));
        let ms: Vec<usize> = (2..=6).collect();
        let full = grid_optics(&t, &ms, &[Metric::Euclidean, Metric::Cosine], 2, None);
        let a = grid_optics(&t, &ms, &[Metric::Euclidean], 2, None);
        let b = grid_optics(&t, &ms, &[Metric::Cosine], 2, None);
        match (full, a, b) {
            (Ok(full), Ok(a), Ok(b)) => {
                let merged = a.merge(&b).unwrap();
                prop_assert_eq!(&merged.rows, &full.rows);
                prop_assert_eq!(&merged.recommendation, &full.recommendation);
                prop_assert_eq!(full.rerank(), full.recommendation);
            }
            (full, _, _) => prop_assume!(full.is_ok()),
        }
    }
}

#[test]
fn sweeps_are_deterministic_and_leave_input_alone() {
    let t = table(blobs(21, 90, 4));
    let before = t.clone();
    let ks: Vec<usize> = (2..=7).collect();
    for m in [SweepMethod::Kmeans, SweepMethod::Minibatch, SweepMethod::Fuzzy, SweepMethod::Gmm] {
        let a = sweep_k(&t, m, &ks, 4, &SweepOptions::default()).unwrap();
        let b = sweep_k(&t, m, &ks, 4, &SweepOptions::default()).unwrap();
        assert_eq!(a, b, "{m}");
        assert_eq!(a.rerank(), a.recommendation, "{m}");
        assert!(a.recommendation.is_some(), "{m}");
    }
    assert_eq!(t, before);
}
