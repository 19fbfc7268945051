use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::table::FeatureTable;

/// How many principal components to keep.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PcaTarget {
    /// Exactly this many components.
    Components(usize),
    /// The smallest prefix whose cumulative explained variance reaches this
    /// ratio, in `(0, 1]`.
    VarianceRatio(f64),
}

/// Fitted projection onto the leading eigenvectors of the sample covariance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PcaModel {
    /// Retained components, one orthonormal row per component.
    pub components: Vec<Vec<f64>>,
    /// Explained variance ratio of each retained component.
    pub ratios: Vec<f64>,
    /// Ratios of every component, summing to one.
    pub all_ratios: Vec<f64>,
    pub means: Vec<f64>,
    pub input_columns: Vec<String>,
}

// Cumulative ratios are compared with this slack so that a target of 1.0
// is reachable despite rounding.
const RATIO_SLACK: f64 = 1e-12;

impl PcaModel {
    pub fn n_components(&self) -> usize {
        self.components.len()
    }

    pub fn cumulative_ratio(&self) -> f64 {
        self.ratios.iter().sum()
    }

    pub fn transform(&self, table: &FeatureTable) -> Result<FeatureTable> {
        if table.n_cols() != self.means.len() {
            return Err(Error::DimensionMismatch {
                expected: self.means.len(),
                found: table.n_cols(),
            });
        }
        let k = self.components.len();
        let mut values = Vec::with_capacity(table.n_rows() * k);
        for row in table.rows() {
            for comp in &self.components {
                values.push(
                    comp.iter()
                        .zip(row.iter().zip(&self.means))
                        .map(|(c, (x, m))| c * (x - m))
                        .sum(),
                );
            }
        }
        let names = (1..=k).map(|i| format!("pc{i}")).collect();
        FeatureTable::from_flat(table.row_ids().to_vec(), names, values)
    }

    /// Maps component scores back into the input space.
    pub fn reconstruct(&self, scores: &FeatureTable) -> Result<FeatureTable> {
        let k = self.components.len();
        if scores.n_cols() != k {
            return Err(Error::DimensionMismatch {
                expected: k,
                found: scores.n_cols(),
            });
        }
        let d = self.means.len();
        let mut values = Vec::with_capacity(scores.n_rows() * d);
        for row in scores.rows() {
            for j in 0..d {
                values.push(
                    self.means[j]
                        + row
                            .iter()
                            .zip(&self.components)
                            .map(|(s, c)| s * c[j])
                            .sum::<f64>(),
                );
            }
        }
        FeatureTable::from_flat(scores.row_ids().to_vec(), self.input_columns.clone(), values)
    }
}

/// Fits PCA by eigendecomposition of the sample covariance and returns the
/// projected table. Each component's largest-magnitude loading is made
/// positive so results do not depend on solver sign choices.
pub fn pca_fit_transform(
    table: &FeatureTable,
    target: PcaTarget,
) -> Result<(FeatureTable, PcaModel)> {
    let n = table.n_rows();
    let d = table.n_cols();
    if n < 2 {
        return Err(Error::param("PCA needs more than one row"));
    }
    match target {
        PcaTarget::Components(k) if k == 0 || k > d => {
            return Err(Error::param(format!(
                "component count {k} must be in 1..={d}"
            )))
        }
        PcaTarget::VarianceRatio(r) if !(r > 0.0 && r <= 1.0) => {
            return Err(Error::param(format!("variance ratio {r} must be in (0, 1]")))
        }
        _ => {}
    }

    let mut means = vec![0.0; d];
    for row in table.rows() {
        for (m, v) in means.iter_mut().zip(row) {
            *m += v;
        }
    }
    means.iter_mut().for_each(|m| *m /= n as f64);
    let mut cov = DMatrix::<f64>::zeros(d, d);
    for row in table.rows() {
        for a in 0..d {
            let da = row[a] - means[a];
            for b in a..d {
                cov[(a, b)] += da * (row[b] - means[b]);
            }
        }
    }
    for a in 0..d {
        for b in a..d {
            let v = cov[(a, b)] / (n - 1) as f64;
            cov[(a, b)] = v;
            cov[(b, a)] = v;
        }
    }
    if cov.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numeric("covariance matrix is not finite".into()));
    }

    let eig = SymmetricEigen::new(cov);
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&a, &b| {
        eig.eigenvalues[b]
            .total_cmp(&eig.eigenvalues[a])
            .then(a.cmp(&b))
    });
    let values: Vec<f64> = order.iter().map(|&i| eig.eigenvalues[i].max(0.0)).collect();
    let total: f64 = values.iter().sum();
    if !(total > 0.0) {
        return Err(Error::Numeric("data has zero total variance".into()));
    }
    let all_ratios: Vec<f64> = values.iter().map(|v| v / total).collect();
    let mut components: Vec<Vec<f64>> = order
        .iter()
        .map(|&i| eig.eigenvectors.column(i).iter().copied().collect())
        .collect();
    for comp in &mut components {
        let lead = comp
            .iter()
            .enumerate()
            .fold((0, 0.0f64), |best, (j, v)| {
                if v.abs() > best.1.abs() {
                    (j, *v)
                } else {
                    best
                }
            })
            .1;
        if lead < 0.0 {
            comp.iter_mut().for_each(|v| *v = -*v);
        }
    }

    let keep = match target {
        PcaTarget::Components(k) => k,
        PcaTarget::VarianceRatio(r) => {
            let mut acc = 0.0;
            let mut k = d;
            for (i, ratio) in all_ratios.iter().enumerate() {
                acc += ratio;
                if acc + RATIO_SLACK >= r {
                    k = i + 1;
                    break;
                }
            }
            k
        }
    };
    components.truncate(keep);
    let model = PcaModel {
        components,
        ratios: all_ratios[..keep].to_vec(),
        all_ratios,
        means,
        input_columns: table.columns().to_vec(),
    };
    Ok((model.transform(table)?, model))
}
