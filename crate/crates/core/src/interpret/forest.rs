use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::labelled_rows;
use super::tree::{class_index, Builder, Sampler, TreeParams};
use crate::error::{Error, Result};
use crate::table::{FeatureTable, LabelVector};

/// Random forest settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForestParams {
    pub n_trees: usize,
    pub seed: u64,
    /// Features drawn per split; `None` means `max(1, floor(sqrt(d)))`.
    pub max_features: Option<usize>,
    pub tree: TreeParams,
}

impl ForestParams {
    pub fn new(n_trees: usize, seed: u64) -> Self {
        Self {
            n_trees,
            seed,
            max_features: None,
            tree: TreeParams::default(),
        }
    }
}

/// Normalized impurity-decrease importance per feature.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImportanceVector {
    pub features: Vec<String>,
    pub values: Vec<f64>,
}

impl ImportanceVector {
    /// `(feature, importance)` by decreasing importance, column order on ties.
    pub fn ranked(&self) -> Vec<(String, f64)> {
        let mut v: Vec<(String, f64)> = self
            .features
            .iter()
            .cloned()
            .zip(self.values.iter().copied())
            .collect();
        v.sort_by(|a, b| b.1.total_cmp(&a.1));
        v
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["feature", "importance"])?;
        for (f, v) in self.ranked() {
            w.write_record([f, v.to_string()])?;
        }
        w.flush().map_err(|e| Error::io("<csv writer>", e))?;
        Ok(())
    }
}

/// Bagged CART trees with per-split feature subsampling. Each tree's
/// importances are normalized, averaged over trees and normalized again.
/// Tree seeds are drawn up front so results do not depend on scheduling.
pub fn forest_importance(
    table: &FeatureTable,
    labels: &LabelVector,
    params: &ForestParams,
) -> Result<ImportanceVector> {
    if params.n_trees == 0 {
        return Err(Error::param("n_trees must be at least 1"));
    }
    let (rows, ls) = labelled_rows(table, labels)?;
    let classes = labels.cluster_ids();
    if classes.len() < 2 {
        return Err(Error::TooFewClusters {
            needed: 2,
            found: classes.len(),
        });
    }
    let d = table.n_cols();
    let max_features = params
        .max_features
        .unwrap_or_else(|| ((d as f64).sqrt().floor() as usize).max(1));
    if max_features == 0 {
        return Err(Error::param("max_features must be at least 1"));
    }
    let y = class_index(table.n_rows(), &rows, &ls, &classes);
    let mut master = ChaCha8Rng::seed_from_u64(params.seed);
    let seeds: Vec<u64> = (0..params.n_trees).map(|_| master.random()).collect();
    let per_tree: Vec<Vec<f64>> = seeds
        .par_iter()
        .map(|&s| {
            let mut rng = ChaCha8Rng::seed_from_u64(s);
            let mut sample: Vec<usize> = (0..rows.len())
                .map(|_| rows[rng.random_range(0..rows.len())])
                .collect();
            let mut b = Builder {
                table,
                y: &y,
                n_classes: classes.len(),
                classes: &classes,
                params: &params.tree,
                sampler: Some(Sampler {
                    rng: &mut rng,
                    max_features,
                }),
            };
            let root = b.grow(&mut sample, 0);
            let mut imp = vec![0.0; d];
            root.accumulate(sample.len(), &mut imp);
            let total: f64 = imp.iter().sum();
            if total > 0.0 {
                imp.iter_mut().for_each(|v| *v /= total);
            }
            imp
        })
        .collect();
    let mut values = vec![0.0; d];
    for imp in &per_tree {
        for (v, x) in values.iter_mut().zip(imp) {
            *v += x;
        }
    }
    let total: f64 = values.iter().sum();
    if total > 0.0 {
        values.iter_mut().for_each(|v| *v /= total);
    }
    Ok(ImportanceVector {
        features: table.columns().to_vec(),
        values,
    })
}
