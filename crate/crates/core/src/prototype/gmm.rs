use std::fmt;
use std::str::FromStr;

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use serde::{Deserialize, Serialize};

use super::kmeans::KMeansParams;
use super::{check_k, Assign, Init};
use crate::error::{Error, Result};
use crate::table::{FeatureTable, LabelVector};

/// Shape constraint on component covariances.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CovarianceType {
    /// One unrestricted matrix per component.
    #[default]
    Full,
    /// One unrestricted matrix shared by all components.
    Tied,
    /// One diagonal matrix per component.
    Diagonal,
    /// One scalar variance per component.
    Spherical,
}

impl CovarianceType {
    pub const ALL: [CovarianceType; 4] = [Self::Full, Self::Tied, Self::Diagonal, Self::Spherical];

    /// Free covariance parameters for `k` components in `d` dimensions.
    pub fn covariance_parameters(self, k: usize, d: usize) -> usize {
        match self {
            Self::Full => k * d * (d + 1) / 2,
            Self::Tied => d * (d + 1) / 2,
            Self::Diagonal => k * d,
            Self::Spherical => k,
        }
    }

    /// Total free parameters: covariances, means and `k - 1` weights.
    pub fn n_parameters(self, k: usize, d: usize) -> usize {
        self.covariance_parameters(k, d) + k * d + k - 1
    }
}

impl fmt::Display for CovarianceType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Full => "full",
            Self::Tied => "tied",
            Self::Diagonal => "diagonal",
            Self::Spherical => "spherical",
        })
    }
}

impl FromStr for CovarianceType {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "full" => Ok(Self::Full),
            "tied" => Ok(Self::Tied),
            "diag" | "diagonal" => Ok(Self::Diagonal),
            "spherical" => Ok(Self::Spherical),
            other => Err(Error::param(format!("unknown covariance type `{other}`"))),
        }
    }
}

/// Gaussian mixture hyperparameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GmmParams {
    pub k: usize,
    pub covariance_type: CovarianceType,
    pub seed: u64,
    pub max_iterations: usize,
    /// Converged once the mean per-row log-likelihood gain drops below this.
    pub tolerance: f64,
    /// Added to every covariance diagonal.
    pub reg_floor: f64,
}

impl GmmParams {
    pub fn new(k: usize) -> Self {
        Self {
            k,
            covariance_type: CovarianceType::Full,
            seed: 0,
            max_iterations: 200,
            tolerance: 1e-6,
            reg_floor: 1e-6,
        }
    }

    pub fn fit(&self, table: &FeatureTable) -> Result<GmmModel> {
        let n = table.n_rows();
        check_k(self.k, n)?;
        if !(self.reg_floor > 0.0) || !self.reg_floor.is_finite() {
            return Err(Error::param("reg_floor must be positive"));
        }
        if !(self.tolerance > 0.0) {
            return Err(Error::param("tolerance must be positive"));
        }
        if self.max_iterations == 0 {
            return Err(Error::param("max_iterations must be at least 1"));
        }
        // Hard k-means++ seeded partition as the initial responsibilities.
        let start = KMeansParams {
            restarts: 1,
            init: Init::KMeansPlusPlus,
            ..KMeansParams::new(self.k).with_seed(self.seed)
        }
        .fit(table)?;
        let mut resp = vec![0.0; n * self.k];
        for (i, &l) in start.labels.as_slice().iter().enumerate() {
            resp[i * self.k + l as usize] = 1.0;
        }
        let mut model = GmmModel {
            k: self.k,
            covariance_type: self.covariance_type,
            weights: vec![],
            means: vec![],
            covariances: vec![],
            log_likelihood_trace: vec![],
            converged: false,
            iterations: 0,
            seed: self.seed,
            reg_floor: self.reg_floor,
            tolerance: self.tolerance,
            labels: LabelVector::new(vec![])?,
        };
        model.m_step(table, &resp);
        let mut iterations = 0;
        loop {
            let factors = model.factors()?;
            let ll = model.e_step(table, &factors, &mut resp);
            if let Some(&prev) = model.log_likelihood_trace.last() {
                if (ll - prev) / (n as f64) < self.tolerance {
                    model.log_likelihood_trace.push(ll);
                    model.converged = true;
                    break;
                }
            }
            model.log_likelihood_trace.push(ll);
            if iterations == self.max_iterations {
                break;
            }
            iterations += 1;
            model.m_step(table, &resp);
        }
        model.iterations = iterations;
        model.labels = LabelVector::new(
            (0..n)
                .map(|i| argmax(&resp[i * self.k..(i + 1) * self.k]) as i32)
                .collect(),
        )?;
        Ok(model)
    }
}

/// Fitted Gaussian mixture.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GmmModel {
    pub k: usize,
    pub covariance_type: CovarianceType,
    pub weights: Vec<f64>,
    pub means: Vec<Vec<f64>>,
    /// One `d × d` matrix per component, regularization included. Tied
    /// models repeat the shared matrix.
    pub covariances: Vec<Vec<Vec<f64>>>,
    /// Total log-likelihood of the training rows before each M-step; the
    /// last entry belongs to the returned parameters.
    pub log_likelihood_trace: Vec<f64>,
    pub converged: bool,
    /// Completed M-steps.
    pub iterations: usize,
    pub seed: u64,
    pub reg_floor: f64,
    pub tolerance: f64,
    /// Highest-responsibility component of each training row.
    pub labels: LabelVector,
}

type Factor = Cholesky<f64, Dyn>;

impl GmmModel {
    pub fn dim(&self) -> usize {
        self.means.first().map_or(0, Vec::len)
    }

    /// Log-likelihood of the training rows under the returned parameters.
    pub fn final_log_likelihood(&self) -> f64 {
        *self.log_likelihood_trace.last().unwrap_or(&f64::NAN)
    }

    pub fn n_parameters(&self) -> usize {
        self.covariance_type.n_parameters(self.k, self.dim())
    }

    /// Total log-likelihood of `table`.
    pub fn log_likelihood(&self, table: &FeatureTable) -> Result<f64> {
        self.check_dim(table)?;
        let factors = self.factors()?;
        let mut buf = vec![0.0; table.n_rows() * self.k];
        Ok(self.e_step(table, &factors, &mut buf))
    }

    /// Posterior component probabilities, one row per table row.
    pub fn responsibilities(&self, table: &FeatureTable) -> Result<Vec<Vec<f64>>> {
        self.check_dim(table)?;
        let factors = self.factors()?;
        let mut buf = vec![0.0; table.n_rows() * self.k];
        self.e_step(table, &factors, &mut buf);
        Ok(buf.chunks(self.k).map(<[f64]>::to_vec).collect())
    }

    fn check_dim(&self, table: &FeatureTable) -> Result<()> {
        if table.n_cols() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: table.n_cols(),
            });
        }
        Ok(())
    }

    fn factors(&self) -> Result<Vec<Factor>> {
        let d = self.dim();
        self.covariances
            .iter()
            .enumerate()
            .map(|(c, cov)| {
                let m = DMatrix::from_fn(d, d, |a, b| cov[a][b]);
                Cholesky::new(m).ok_or_else(|| {
                    Error::Numeric(format!(
                        "covariance of component {c} is not positive definite"
                    ))
                })
            })
            .collect()
    }

    /// Fills `resp` with responsibilities and returns the total
    /// log-likelihood.
    fn e_step(&self, table: &FeatureTable, factors: &[Factor], resp: &mut [f64]) -> f64 {
        let d = self.dim();
        let k = self.k;
        let log_norm: Vec<f64> = factors
            .iter()
            .zip(&self.weights)
            .map(|(f, w)| {
                let log_det: f64 = f.l_dirty().diagonal().iter().map(|v| v.ln()).sum();
                w.ln() - log_det - 0.5 * d as f64 * (2.0 * std::f64::consts::PI).ln()
            })
            .collect();
        let mut total = 0.0;
        let mut diff = DVector::<f64>::zeros(d);
        for (i, row) in table.rows().enumerate() {
            let r = &mut resp[i * k..(i + 1) * k];
            for c in 0..k {
                for j in 0..d {
                    diff[j] = row[j] - self.means[c][j];
                }
                let z = factors[c]
                    .l_dirty()
                    .solve_lower_triangular(&diff)
                    .expect("cholesky factor has a positive diagonal");
                r[c] = log_norm[c] - 0.5 * z.norm_squared();
            }
            let top = r.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let s: f64 = r.iter().map(|v| (v - top).exp()).sum();
            let lse = top + s.ln();
            total += lse;
            for v in r.iter_mut() {
                *v = (*v - lse).exp();
            }
        }
        total
    }

    fn m_step(&mut self, table: &FeatureTable, resp: &[f64]) {
        let n = table.n_rows();
        let d = table.n_cols();
        let k = self.k;
        let tiny = 10.0 * f64::EPSILON;
        let nk: Vec<f64> = (0..k)
            .map(|c| (0..n).map(|i| resp[i * k + c]).sum::<f64>() + tiny)
            .collect();
        let total: f64 = nk.iter().sum();
        self.weights = nk.iter().map(|v| v / total).collect();
        self.means = (0..k)
            .map(|c| {
                let mut m = vec![0.0; d];
                for (i, row) in table.rows().enumerate() {
                    let w = resp[i * k + c];
                    for (a, x) in m.iter_mut().zip(row) {
                        *a += w * x;
                    }
                }
                m.iter_mut().for_each(|a| *a /= nk[c]);
                m
            })
            .collect();
        let scatter = |c: usize| {
            let mut s = vec![vec![0.0; d]; d];
            for (i, row) in table.rows().enumerate() {
                let w = resp[i * k + c];
                for a in 0..d {
                    let da = row[a] - self.means[c][a];
                    for b in a..d {
                        s[a][b] += w * da * (row[b] - self.means[c][b]);
                    }
                }
            }
            for a in 0..d {
                for b in 0..a {
                    s[a][b] = s[b][a];
                }
            }
            s
        };
        let reg = self.reg_floor;
        let with_reg = |mut m: Vec<Vec<f64>>| {
            for (a, row) in m.iter_mut().enumerate() {
                row[a] += reg;
            }
            m
        };
        self.covariances = match self.covariance_type {
            CovarianceType::Full => (0..k)
                .map(|c| {
                    let s = scatter(c);
                    with_reg(s.into_iter().map(|r| r.into_iter().map(|v| v / nk[c]).collect()).collect())
                })
                .collect(),
            CovarianceType::Tied => {
                let mut shared = vec![vec![0.0; d]; d];
                for c in 0..k {
                    for (acc, s) in shared.iter_mut().zip(scatter(c)) {
                        for (a, v) in acc.iter_mut().zip(s) {
                            *a += v;
                        }
                    }
                }
                let shared = with_reg(
                    shared
                        .into_iter()
                        .map(|r| r.into_iter().map(|v| v / total).collect())
                        .collect(),
                );
                vec![shared; k]
            }
            CovarianceType::Diagonal | CovarianceType::Spherical => (0..k)
                .map(|c| {
                    let s = scatter(c);
                    let var: Vec<f64> = (0..d).map(|a| s[a][a] / nk[c]).collect();
                    let mut m = vec![vec![0.0; d]; d];
                    if self.covariance_type == CovarianceType::Diagonal {
                        for a in 0..d {
                            m[a][a] = var[a];
                        }
                    } else {
                        let mean = var.iter().sum::<f64>() / d as f64;
                        for a in 0..d {
                            m[a][a] = mean;
                        }
                    }
                    with_reg(m)
                })
                .collect(),
        };
    }
}

impl Assign for GmmModel {
    fn assign(&self, table: &FeatureTable) -> Result<LabelVector> {
        let resp = self.responsibilities(table)?;
        LabelVector::new(resp.iter().map(|r| argmax(r) as i32).collect())
    }
}

/// Convenience wrapper around [`GmmParams`].
pub fn gmm_fit(
    table: &FeatureTable,
    k: usize,
    covariance_type: CovarianceType,
    seed: u64,
    max_iterations: usize,
    tolerance: f64,
    reg_floor: f64,
) -> Result<GmmModel> {
    GmmParams {
        k,
        covariance_type,
        seed,
        max_iterations,
        tolerance,
        reg_floor,
    }
    .fit(table)
}

fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (j, &x) in v.iter().enumerate() {
        if x > v[best] {
            best = j;
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn blobs(seed: u64, centers: &[[f64; 2]], per: usize, spread: f64) -> FeatureTable {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut rows = Vec::new();
        for c in centers {
            for _ in 0..per {
                rows.push(vec![
                    c[0] + spread * (rng.random::<f64>() - 0.5),
                    c[1] + spread * (rng.random::<f64>() - 0.5),
                ]);
            }
        }
        FeatureTable::from_rows(rows).unwrap()
    }

    #[test]
    fn single_component_closed_form() {
        let t = blobs(1, &[[0.0, 0.0]], 40, 3.0);
        let m = gmm_fit(&t, 1, CovarianceType::Full, 0, 50, 1e-9, 1e-6).unwrap();
        let n = t.n_rows() as f64;
        let mean: Vec<f64> = (0..2).map(|j| t.column(j).iter().sum::<f64>() / n).collect();
        for a in 0..2 {
            assert!((m.means[0][a] - mean[a]).abs() < 1e-10);
            for b in 0..2 {
                let mle = t
                    .rows()
                    .map(|r| (r[a] - mean[a]) * (r[b] - mean[b]))
                    .sum::<f64>()
                    / n;
                let expected = mle + if a == b { 1e-6 } else { 0.0 };
                assert!((m.covariances[0][a][b] - expected).abs() < 1e-10);
            }
        }
        assert!((m.weights[0] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn separated_blobs_are_one_hot() {
        let t = blobs(2, &[[0.0, 0.0], [30.0, 30.0]], 25, 1.0);
        for ct in CovarianceType::ALL {
            let m = gmm_fit(&t, 2, ct, 4, 100, 1e-8, 1e-6).unwrap();
            let resp = m.responsibilities(&t).unwrap();
            for r in &resp {
                let hi = r.iter().copied().fold(0.0, f64::max);
                assert!(1.0 - hi < 1e-6, "{ct}: {r:?}");
            }
            let rows: Vec<&[f64]> = t.rows().collect();
            for blob in [0..25, 25..50] {
                let comp = m.labels.as_slice()[blob.start] as usize;
                for j in 0..2 {
                    let mean = rows[blob.clone()].iter().map(|r| r[j]).sum::<f64>() / 25.0;
                    assert!((m.means[comp][j] - mean).abs() < 1e-4);
                }
            }
        }
    }

    #[test]
    fn trace_is_monotone_and_weights_normalized() {
        let t = blobs(3, &[[0.0, 0.0], [2.0, 1.0], [0.5, 3.0]], 30, 2.5);
        for ct in CovarianceType::ALL {
            let m = gmm_fit(&t, 3, ct, 8, 300, 1e-10, 1e-6).unwrap();
            for w in m.log_likelihood_trace.windows(2) {
                assert!(w[1] >= w[0] - 1e-7, "{ct}: {:?}", m.log_likelihood_trace);
            }
            assert!((m.weights.iter().sum::<f64>() - 1.0).abs() < 1e-10);
            let ll = m.log_likelihood(&t).unwrap();
            assert!((ll - m.final_log_likelihood()).abs() < 1e-8);
            assert_eq!(m.assign(&t).unwrap(), m.labels);
        }
    }

    #[test]
    fn heavier_weight_wins_at_midpoint() {
        let eye = vec![vec![1.0, 0.0], vec![0.0, 1.0]];
        let m = GmmModel {
            k: 2,
            covariance_type: CovarianceType::Full,
            weights: vec![0.99, 0.01],
            means: vec![vec![-1.0, 0.0], vec![1.0, 0.0]],
            covariances: vec![eye.clone(), eye],
            log_likelihood_trace: vec![],
            converged: true,
            iterations: 0,
            seed: 0,
            reg_floor: 1e-6,
            tolerance: 1e-6,
            labels: LabelVector::new(vec![]).unwrap(),
        };
        let t = FeatureTable::from_rows(vec![vec![0.0, 0.0]]).unwrap();
        assert_eq!(m.assign(&t).unwrap().as_slice(), &[0]);
        let r = m.responsibilities(&t).unwrap();
        assert!((r[0][0] - 0.99).abs() < 1e-12);
    }

    #[test]
    fn parameter_counts() {
        assert_eq!(CovarianceType::Full.n_parameters(2, 3), 12 + 6 + 1);
        assert_eq!(CovarianceType::Tied.n_parameters(2, 3), 6 + 6 + 1);
        assert_eq!(CovarianceType::Diagonal.n_parameters(2, 3), 6 + 6 + 1);
        assert_eq!(CovarianceType::Spherical.n_parameters(2, 3), 2 + 6 + 1);
        assert_eq!("diag".parse::<CovarianceType>().unwrap(), CovarianceType::Diagonal);
    }

    #[test]
    fn duplicated_rows_stay_regular() {
        let t = FeatureTable::from_rows(vec![vec![1.0, 1.0]; 6]).unwrap();
        let m = gmm_fit(&t, 2, CovarianceType::Full, 0, 20, 1e-6, 1e-6).unwrap();
        assert!(m.final_log_likelihood().is_finite());
    }
}
