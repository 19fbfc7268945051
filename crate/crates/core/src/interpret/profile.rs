use std::io::Write;

use serde::{Deserialize, Serialize};

use super::labelled_rows;
use crate::error::{Error, Result};
use crate::table::{FeatureTable, LabelVector};

/// Per-cluster feature means relative to the mean over clustered rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterProfile {
    pub features: Vec<String>,
    pub clusters: Vec<i32>,
    pub sizes: Vec<usize>,
    /// `means[c][f]`
    pub means: Vec<Vec<f64>>,
    pub global_means: Vec<f64>,
    /// `means[c][f] - global_means[f]`
    pub deltas: Vec<Vec<f64>>,
    /// Largest minus smallest cluster mean, per feature.
    pub spread: Vec<f64>,
    /// Feature indices by decreasing spread, column order on ties.
    pub ranking: Vec<usize>,
}

/// Profiles the clusters of `labels`; noise rows are left out, including
/// from the global means.
pub fn cluster_profile(table: &FeatureTable, labels: &LabelVector) -> Result<ClusterProfile> {
    let (rows, ls) = labelled_rows(table, labels)?;
    let clusters = labels.cluster_ids();
    if clusters.is_empty() {
        return Err(Error::TooFewClusters { needed: 1, found: 0 });
    }
    let d = table.n_cols();
    let mut sizes = vec![0usize; clusters.len()];
    let mut sums = vec![vec![0.0; d]; clusters.len()];
    let mut total = vec![0.0; d];
    for (&r, l) in rows.iter().zip(&ls) {
        let c = clusters.binary_search(l).unwrap();
        sizes[c] += 1;
        for (j, x) in table.row(r).iter().enumerate() {
            sums[c][j] += x;
            total[j] += x;
        }
    }
    let global_means: Vec<f64> = total.iter().map(|t| t / rows.len() as f64).collect();
    let means: Vec<Vec<f64>> = sums
        .iter()
        .zip(&sizes)
        .map(|(s, &n)| s.iter().map(|v| v / n as f64).collect())
        .collect();
    let deltas = means
        .iter()
        .map(|m| m.iter().zip(&global_means).map(|(a, g)| a - g).collect())
        .collect();
    let spread: Vec<f64> = (0..d)
        .map(|j| {
            let col = means.iter().map(|m| m[j]);
            col.clone().fold(f64::NEG_INFINITY, f64::max) - col.fold(f64::INFINITY, f64::min)
        })
        .collect();
    let mut ranking: Vec<usize> = (0..d).collect();
    ranking.sort_by(|&a, &b| spread[b].total_cmp(&spread[a]));
    Ok(ClusterProfile {
        features: table.columns().to_vec(),
        clusters,
        sizes,
        means,
        global_means,
        deltas,
        spread,
        ranking,
    })
}

impl ClusterProfile {
    /// Long-format CSV: `cluster, size, feature, mean, delta`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["cluster", "size", "feature", "mean", "delta"])?;
        for (c, id) in self.clusters.iter().enumerate() {
            for (j, f) in self.features.iter().enumerate() {
                w.write_record([
                    id.to_string(),
                    self.sizes[c].to_string(),
                    f.clone(),
                    self.means[c][j].to_string(),
                    self.deltas[c][j].to_string(),
                ])?;
            }
        }
        w.flush().map_err(|e| Error::io("<csv writer>", e))?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn one_cluster_has_zero_deltas() {
        let t = FeatureTable::from_rows(vec![vec![1.0, 3.0], vec![2.0, -1.0]]).unwrap();
        let p = cluster_profile(&t, &LabelVector::new(vec![0, 0]).unwrap()).unwrap();
        assert_eq!(p.deltas, vec![vec![0.0, 0.0]]);
    }

    #[test]
    fn symmetric_two_clusters() {
        let t = FeatureTable::from_rows(vec![
            vec![-1.0, 0.0],
            vec![-1.0, 5.0],
            vec![1.0, 0.0],
            vec![1.0, 5.0],
        ])
        .unwrap();
        let p = cluster_profile(&t, &LabelVector::new(vec![0, 0, 1, 1]).unwrap()).unwrap();
        assert_eq!(p.deltas[0][0], -1.0);
        assert_eq!(p.deltas[1][0], 1.0);
        assert_eq!(p.spread, vec![2.0, 0.0]);
        assert_eq!(p.ranking, vec![0, 1]);
    }

    #[test]
    fn noise_excluded_and_weighted_mean_holds() {
        let t = FeatureTable::from_rows(vec![
            vec![0.0],
            vec![2.0],
            vec![10.0],
            vec![100.0],
        ])
        .unwrap();
        let p = cluster_profile(&t, &LabelVector::new(vec![0, 0, 1, -1]).unwrap()).unwrap();
        assert_eq!(p.sizes, vec![2, 1]);
        assert_eq!(p.global_means[0], 4.0);
        let weighted: f64 = p.means.iter().zip(&p.sizes).map(|(m, &s)| m[0] * s as f64).sum::<f64>() / 3.0;
        assert!((weighted - p.global_means[0]).abs() < 1e-12);
    }
}
