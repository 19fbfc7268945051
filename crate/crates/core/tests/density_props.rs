mod common;

use clustkit::density::{dbscan, optics_order, DensityParams, PointClass};
use clustkit::{Metric, NOISE};
use common::{blobs, groups, permutation, table};
use proptest::prelude::*;

fn core_relation(labels: &[i32], classes: &[PointClass]) -> Vec<Vec<usize>> {
    let masked: Vec<i32> = labels
        .iter()
        .zip(classes)
        .map(|(&l, &c)| if c == PointClass::Core { l } else { NOISE })
        .collect();
    groups(&masked)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn classification_matches_brute_force(seed in any::<u64>(), n in 10usize..=200, eps in 0.5f64..6.0, min_pts in 2usize..=8) {
        let r = blobs(seed, n, 4);
        let t = table(r.clone());
        let (labels, classes) = dbscan(&t, &DensityParams::new(eps, min_pts, Metric::Euclidean)).unwrap();
        let near = |i: usize, j: usize| Metric::Euclidean.distance(&r[i], &r[j]) <= eps;
        let core: Vec<bool> = (0..n).map(|i| (0..n).filter(|&j| near(i, j)).count() >= min_pts).collect();
        for i in 0..n {
            let expected = if core[i] {
                PointClass::Core
            } else if (0..n).any(|j| core[j] && near(i, j)) {
                PointClass::Border
            } else {
                PointClass::Noise
            };
            prop_assert_eq!(classes[i], expected, "row {}", i);
            prop_assert_eq!(labels[i] == NOISE, expected == PointClass::Noise);
            if expected == PointClass::Border {
                prop_assert!((0..n).any(|j| core[j] && near(i, j) && labels[j] == labels[i]));
            }
        }
        for i in 0..n {
            for j in 0..n {
                if core[i] && core[j] && near(i, j) {
                    prop_assert_eq!(labels[i], labels[j]);
                }
            }
        }
    }

    #[test]
    fn core_structure_ignores_row_order(seed in any::<u64>(), n in 10usize..=120, eps in 0.5f64..5.0, min_pts in 2usize..=6) {
        let r = blobs(seed, n, 3);
        let p = permutation(n, seed ^ 1);
        let params = DensityParams::new(eps, min_pts, Metric::Euclidean);
        let (la, ca) = dbscan(&table(r.clone()), &params).unwrap();
        let (lb, cb) = dbscan(&table(p.iter().map(|&i| r[i].clone()).collect()), &params).unwrap();
        let mut lb_back = vec![0; n];
        let mut cb_back = vec![PointClass::Noise; n];
        for (pos, &orig) in p.iter().enumerate() {
            lb_back[orig] = lb[pos];
            cb_back[orig] = cb[pos];
        }
        prop_assert_eq!(&ca, &cb_back);
        prop_assert_eq!(core_relation(la.as_slice(), &ca), core_relation(&lb_back, &cb_back));
    }

    #[test]
    fn reachability_at_least_predecessor_core(seed in any::<u64>(), n in 5usize..=100, min_pts in 2usize..=8) {
        let t = table(blobs(seed, n, 3));
        let o = optics_order(&t, &DensityParams::new(f64::INFINITY, min_pts, Metric::Euclidean)).unwrap();
        let mut seen = vec![false; n];
        for &p in &o.ordering {
            prop_assert!(!seen[p]);
            seen[p] = true;
            if let Some(q) = o.predecessor[p] {
                prop_assert!(o.reachability[p].is_finite());
                prop_assert!(o.reachability[p] >= o.core_distance[q]);
            } else {
                prop_assert!(o.reachability[p].is_infinite());
            }
        }
    }
}
