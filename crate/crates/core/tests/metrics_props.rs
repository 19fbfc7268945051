mod common;

use clustkit::metrics::{calinski_harabasz, davies_bouldin, silhouette};
use clustkit::{FeatureTable, LabelVector, Metric};
use common::{rows, table};
use proptest::prelude::*;

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

fn members(labels: &[i32]) -> Vec<Vec<usize>> {
    let k = labels.iter().copied().max().unwrap_or(-1) + 1;
    (0..k)
        .map(|c| (0..labels.len()).filter(|&i| labels[i] == c).collect())
        .filter(|v: &Vec<usize>| !v.is_empty())
        .collect()
}

fn mean_of(r: &[Vec<f64>], idx: &[usize]) -> Vec<f64> {
    let d = r[0].len();
    (0..d).map(|j| idx.iter().map(|&i| r[i][j]).sum::<f64>() / idx.len() as f64).collect()
}

fn silhouette_oracle(r: &[Vec<f64>], labels: &[i32]) -> f64 {
    let cl = members(labels);
    let mut s = Vec::new();
    for (ci, c) in cl.iter().enumerate() {
        for &i in c {
            if c.len() == 1 {
                s.push(0.0);
                continue;
            }
            let a = c.iter().filter(|&&j| j != i).map(|&j| dist(&r[i], &r[j])).sum::<f64>() / (c.len() - 1) as f64;
            let b = cl
                .iter()
                .enumerate()
                .filter(|(o, _)| *o != ci)
                .map(|(_, o)| o.iter().map(|&j| dist(&r[i], &r[j])).sum::<f64>() / o.len() as f64)
                .fold(f64::INFINITY, f64::min);
            s.push(if a.max(b) == 0.0 { 0.0 } else { (b - a) / a.max(b) });
        }
    }
    s.iter().sum::<f64>() / s.len() as f64
}

fn ch_oracle(r: &[Vec<f64>], labels: &[i32]) -> f64 {
    let cl = members(labels);
    let all: Vec<usize> = cl.iter().flatten().copied().collect();
    let g = mean_of(r, &all);
    let mut between = 0.0;
    let mut within = 0.0;
    for c in &cl {
        let m = mean_of(r, c);
        between += c.len() as f64 * dist(&m, &g).powi(2);
        within += c.iter().map(|&i| dist(&r[i], &m).powi(2)).sum::<f64>();
    }
    let (n, k) = (all.len() as f64, cl.len() as f64);
    between * (n - k) / (within * (k - 1.0))
}

fn db_oracle(r: &[Vec<f64>], labels: &[i32]) -> f64 {
    let cl = members(labels);
    let cent: Vec<Vec<f64>> = cl.iter().map(|c| mean_of(r, c)).collect();
    let scat: Vec<f64> = cl
        .iter()
        .zip(&cent)
        .map(|(c, m)| c.iter().map(|&i| dist(&r[i], m)).sum::<f64>() / c.len() as f64)
        .collect();
    let k = cl.len();
    (0..k)
        .map(|i| {
            (0..k)
                .filter(|&j| j != i)
                .map(|j| (scat[i] + scat[j]) / dist(&cent[i], &cent[j]))
                .fold(0.0, f64::max)
        })
        .sum::<f64>()
        / k as f64
}

/// Rows with raw labels in `-1..k`, keeping at least two clusters and one
/// spare row so every index is defined.
fn labelled(n: std::ops::RangeInclusive<usize>) -> impl Strategy<Value = (Vec<Vec<f64>>, Vec<i32>)> {
    rows(n, 1..=4)
        .prop_flat_map(|r| {
            let n = r.len();
            (Just(r), proptest::collection::vec(-1i32..5, n))
        })
        .prop_filter("need two clusters", |(_, l)| {
            let ids: std::collections::BTreeSet<_> = l.iter().filter(|&&x| x >= 0).collect();
            let scored = l.iter().filter(|&&x| x >= 0).count();
            ids.len() >= 2 && ids.len() < scored
        })
        .prop_map(|(r, l)| {
            let canon = LabelVector::canonical(&l);
            (r, canon.as_slice().to_vec())
        })
}

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-9 * (1.0 + a.abs().max(b.abs()))
}

fn scores(t: &FeatureTable, l: &LabelVector) -> [f64; 3] {
    [
        silhouette(t, l, Metric::Euclidean).unwrap(),
        calinski_harabasz(t, l).unwrap(),
        davies_bouldin(t, l).unwrap(),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn indices_match_brute_force((r, l) in labelled(3..=50)) {
        let t = table(r.clone());
        let lv = LabelVector::new(l.clone()).unwrap();
        let [s, ch, db] = scores(&t, &lv);
        prop_assert!(close(s, silhouette_oracle(&r, &l)), "silhouette {s}");
        prop_assert!(close(ch, ch_oracle(&r, &l)), "calinski-harabasz {ch}");
        prop_assert!(close(db, db_oracle(&r, &l)), "davies-bouldin {db}");
        prop_assert!((-1.0..=1.0).contains(&s));
    }

    #[test]
    fn indices_ignore_translation_and_scale(
        (r, l) in labelled(3..=40),
        shift in -100.0f64..100.0,
        scale in 0.01f64..100.0,
    ) {
        let lv = LabelVector::new(l).unwrap();
        let base = scores(&table(r.clone()), &lv);
        let moved: Vec<Vec<f64>> = r.iter().map(|row| row.iter().map(|x| x * scale + shift).collect()).collect();
        let after = scores(&table(moved), &lv);
        for (a, b) in base.iter().zip(&after) {
            prop_assert!((a - b).abs() <= 1e-7 * (1.0 + a.abs()), "{base:?} vs {after:?}");
        }
    }
}
