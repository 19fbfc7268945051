//! Cluster explanations: feature profiles, Jenks natural breaks, CART trees
//! and random-forest importances.

mod forest;
mod jenks;
mod profile;
mod tree;

pub use forest::{forest_importance, ForestParams, ImportanceVector};
pub use jenks::{jenks_breaks, jenks_screen, JenksBreaks};
pub use profile::{cluster_profile, ClusterProfile};
pub use tree::{fit_tree, DecisionTree, TreeNode, TreeParams};

use crate::error::{Error, Result};
use crate::table::{FeatureTable, LabelVector};

/// Non-noise row indices and their labels.
pub(crate) fn labelled_rows(table: &FeatureTable, labels: &LabelVector) -> Result<(Vec<usize>, Vec<i32>)> {
    if labels.len() != table.n_rows() {
        return Err(Error::DimensionMismatch {
            expected: table.n_rows(),
            found: labels.len(),
        });
    }
    Ok(labels
        .as_slice()
        .iter()
        .enumerate()
        .filter(|(_, &l)| l >= 0)
        .map(|(i, &l)| (i, l))
        .unzip())
}
