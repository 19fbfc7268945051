use serde::{Deserialize, Serialize};

use super::labelled_rows;
use crate::error::{Error, Result};
use crate::metrics::v_measure;
use crate::table::{FeatureTable, LabelVector};

/// Optimal 1-D classification into `k` contiguous classes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JenksBreaks {
    pub k: usize,
    /// `k - 1` increasing cut values, each the midpoint between the largest
    /// value of one class and the smallest of the next.
    pub breaks: Vec<f64>,
    /// Sum of squared deviations from class means.
    pub goodness: f64,
    pub class_sizes: Vec<usize>,
}

impl JenksBreaks {
    /// Class index of `value`: the number of breaks below it.
    pub fn classify(&self, value: f64) -> usize {
        self.breaks.partition_point(|&b| b < value)
    }
}

/// Exact natural breaks by dynamic programming over the sorted distinct
/// values. Cuts never separate equal values.
pub fn jenks_breaks(values: &[f64], k: usize) -> Result<JenksBreaks> {
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numeric("jenks input must be finite".into()));
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mut distinct: Vec<f64> = Vec::new();
    let mut weight: Vec<f64> = Vec::new();
    for &v in &sorted {
        if distinct.last() == Some(&v) {
            *weight.last_mut().unwrap() += 1.0;
        } else {
            distinct.push(v);
            weight.push(1.0);
        }
    }
    let m = distinct.len();
    if k == 0 || k > m {
        return Err(Error::param(format!(
            "class count {k} must be in 1..={m} (distinct values)"
        )));
    }
    // Centre before accumulating to limit cancellation in Q - S²/W.
    let centre = sorted.iter().sum::<f64>() / sorted.len() as f64;
    let mut pw = vec![0.0; m + 1];
    let mut ps = vec![0.0; m + 1];
    let mut pq = vec![0.0; m + 1];
    for i in 0..m {
        let x = distinct[i] - centre;
        pw[i + 1] = pw[i] + weight[i];
        ps[i + 1] = ps[i] + weight[i] * x;
        pq[i + 1] = pq[i] + weight[i] * x * x;
    }
    // cost of distinct values a..b (exclusive end)
    let cost = |a: usize, b: usize| {
        let w = pw[b] - pw[a];
        let s = ps[b] - ps[a];
        ((pq[b] - pq[a]) - s * s / w).max(0.0)
    };
    // best[c][j]: first j distinct values in c + 1 classes
    let mut best = vec![vec![f64::INFINITY; m + 1]; k];
    let mut back = vec![vec![0usize; m + 1]; k];
    for j in 1..=m {
        best[0][j] = cost(0, j);
    }
    for c in 1..k {
        for j in c + 1..=m {
            for i in c..j {
                let v = best[c - 1][i] + cost(i, j);
                if v < best[c][j] {
                    best[c][j] = v;
                    back[c][j] = i;
                }
            }
        }
    }
    let mut ends = vec![m];
    let mut j = m;
    for c in (1..k).rev() {
        j = back[c][j];
        ends.push(j);
    }
    ends.push(0);
    ends.reverse();
    let breaks: Vec<f64> = ends[1..k]
        .iter()
        .map(|&e| 0.5 * (distinct[e - 1] + distinct[e]))
        .collect();
    let mut class_sizes = vec![0usize; k];
    let mut goodness = 0.0;
    let mut start = 0;
    for (c, w) in ends.windows(2).enumerate() {
        let size = (pw[w[1]] - pw[w[0]]) as usize;
        class_sizes[c] = size;
        goodness += sdcm(&sorted[start..start + size]);
        start += size;
    }
    Ok(JenksBreaks {
        k,
        breaks,
        goodness,
        class_sizes,
    })
}

// Direct squared deviation from the mean of one class.
fn sdcm(class: &[f64]) -> f64 {
    let mean = class.iter().sum::<f64>() / class.len() as f64;
    class.iter().map(|x| (x - mean) * (x - mean)).sum()
}

/// Classifies each feature on its own into as many Jenks classes as there
/// are clusters and ranks features by v-measure against the clustering.
/// Noise rows are ignored.
pub fn jenks_screen(table: &FeatureTable, labels: &LabelVector) -> Result<Vec<(String, f64)>> {
    let (rows, ls) = labelled_rows(table, labels)?;
    let k = labels.n_clusters();
    if k < 2 {
        return Err(Error::TooFewClusters { needed: 2, found: k });
    }
    let truth = LabelVector::new(ls)?;
    let mut out = Vec::with_capacity(table.n_cols());
    for (j, name) in table.columns().iter().enumerate() {
        let values: Vec<f64> = rows.iter().map(|&r| table.get(r, j)).collect();
        let jb = jenks_breaks(&values, k).map_err(|e| match e {
            Error::InvalidParameter(msg) => Error::param(format!("feature `{name}`: {msg}")),
            other => other,
        })?;
        let classes = LabelVector::new(values.iter().map(|&v| jb.classify(v) as i32).collect())?;
        out.push((name.clone(), v_measure(&truth, &classes)?));
    }
    out.sort_by(|a, b| b.1.total_cmp(&a.1));
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_pairs() {
        let j = jenks_breaks(&[10.0, 1.0, 11.0, 2.0], 2).unwrap();
        assert_eq!(j.breaks, vec![6.0]);
        assert_eq!(j.goodness, 1.0);
        assert_eq!(j.class_sizes, vec![2, 2]);
        assert_eq!(j.classify(2.0), 0);
        assert_eq!(j.classify(10.0), 1);
    }

    #[test]
    fn one_class_per_value() {
        let j = jenks_breaks(&[3.0, 1.0, 2.0], 3).unwrap();
        assert_eq!(j.goodness, 0.0);
        assert_eq!(j.breaks, vec![1.5, 2.5]);
        assert!(jenks_breaks(&[3.0, 1.0, 2.0], 4).is_err());
    }

    #[test]
    fn constant_values() {
        let j = jenks_breaks(&[4.0; 5], 1).unwrap();
        assert!(j.breaks.is_empty());
        assert_eq!(j.goodness, 0.0);
        assert!(jenks_breaks(&[4.0; 5], 2).is_err());
    }

    #[test]
    fn screen_ranks_label_feature_first() {
        let labels = LabelVector::new(vec![0, 0, 1, 1, 2, 2]).unwrap();
        let t = FeatureTable::new(
            (0..6).map(|i| i.to_string()).collect(),
            vec!["noise".into(), "exp_label".into()],
            vec![
                vec![0.3, 1.0],
                vec![0.9, 1.0],
                vec![0.1, 2.7],
                vec![0.5, 2.7],
                vec![0.8, 20.0],
                vec![0.2, 20.0],
            ],
        )
        .unwrap();
        let r = jenks_screen(&t, &labels).unwrap();
        assert_eq!(r[0].0, "exp_label");
        assert!((r[0].1 - 1.0).abs() < 1e-12);
    }
}
