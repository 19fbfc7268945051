use std::fmt::Write as _;

use rand::seq::SliceRandom;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::labelled_rows;
use crate::error::{Error, Result};
use crate::table::{serde_float, FeatureTable, LabelVector};

/// Stopping rules for tree growth.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreeParams {
    /// `None` grows until leaves are pure or cannot be split.
    pub max_depth: Option<usize>,
    /// Minimum rows on each side of a split.
    pub min_leaf: usize,
}

impl Default for TreeParams {
    fn default() -> Self {
        Self {
            max_depth: None,
            min_leaf: 1,
        }
    }
}

impl TreeParams {
    fn validate(&self) -> Result<()> {
        if self.max_depth == Some(0) {
            return Err(Error::param("max_depth must be at least 1"));
        }
        if self.min_leaf == 0 {
            return Err(Error::param("min_leaf must be at least 1"));
        }
        Ok(())
    }
}

/// Node of a binary classification tree. Rows with
/// `value <= threshold` go left.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TreeNode {
    Leaf {
        /// Rows per class, indexed like [`DecisionTree::classes`].
        counts: Vec<usize>,
        /// Majority class id, lowest on ties.
        label: i32,
    },
    Split {
        feature: usize,
        #[serde(with = "serde_float")]
        threshold: f64,
        n_samples: usize,
        impurity: f64,
        /// Gini of this node minus the size-weighted Gini of its children.
        impurity_decrease: f64,
        left: Box<TreeNode>,
        right: Box<TreeNode>,
    },
}

/// Fitted CART classifier with Gini impurity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionTree {
    pub root: TreeNode,
    pub classes: Vec<i32>,
    pub features: Vec<String>,
    pub params: TreeParams,
    /// Units of the thresholds, for reports.
    pub units: String,
    pub flags: Vec<String>,
    pub n_samples: usize,
}

/// Fits a tree predicting `labels` from `table`; noise rows are ignored.
/// Splits maximize impurity decrease over all features and midpoints
/// between adjacent distinct values, lowest feature then lowest threshold on
/// ties. An impure node is split even when the best decrease is zero.
pub fn fit_tree(table: &FeatureTable, labels: &LabelVector, params: &TreeParams) -> Result<DecisionTree> {
    params.validate()?;
    let (rows, ls) = labelled_rows(table, labels)?;
    if rows.is_empty() {
        return Err(Error::TooFewClusters { needed: 1, found: 0 });
    }
    let classes = labels.cluster_ids();
    let y = class_index(table.n_rows(), &rows, &ls, &classes);
    let mut flags = Vec::new();
    if classes.len() < 2 {
        flags.push("single class: tree is one leaf".to_string());
    }
    let mut rows = rows;
    let mut b = Builder {
        table,
        y: &y,
        n_classes: classes.len(),
        classes: &classes,
        params,
        sampler: None,
    };
    let root = b.grow(&mut rows, 0);
    Ok(DecisionTree {
        root,
        n_samples: rows.len(),
        classes,
        features: table.columns().to_vec(),
        params: params.clone(),
        units: "input table units".to_string(),
        flags,
    })
}

pub(crate) fn class_index(n: usize, rows: &[usize], ls: &[i32], classes: &[i32]) -> Vec<usize> {
    let mut y = vec![usize::MAX; n];
    for (&r, l) in rows.iter().zip(ls) {
        y[r] = classes.binary_search(l).unwrap();
    }
    y
}

/// Per-split feature subsampling used by forests.
pub(crate) struct Sampler<'a> {
    pub rng: &'a mut ChaCha8Rng,
    pub max_features: usize,
}

pub(crate) struct Builder<'a> {
    pub table: &'a FeatureTable,
    pub y: &'a [usize],
    pub n_classes: usize,
    pub classes: &'a [i32],
    pub params: &'a TreeParams,
    pub sampler: Option<Sampler<'a>>,
}

struct Candidate {
    feature: usize,
    threshold: f64,
    decrease: f64,
    left_len: usize,
}

fn gini(counts: &[usize], n: usize) -> f64 {
    let n = n as f64;
    1.0 - counts.iter().map(|&c| (c as f64 / n).powi(2)).sum::<f64>()
}

impl Builder<'_> {
    fn counts(&self, rows: &[usize]) -> Vec<usize> {
        let mut c = vec![0; self.n_classes];
        for &r in rows {
            c[self.y[r]] += 1;
        }
        c
    }

    fn leaf(&self, counts: Vec<usize>) -> TreeNode {
        let mut best = 0;
        for (i, &c) in counts.iter().enumerate() {
            if c > counts[best] {
                best = i;
            }
        }
        TreeNode::Leaf {
            label: self.classes[best],
            counts,
        }
    }

    pub(crate) fn grow(&mut self, rows: &mut [usize], depth: usize) -> TreeNode {
        let n = rows.len();
        let counts = self.counts(rows);
        let impurity = gini(&counts, n);
        let pure = counts.iter().filter(|&&c| c > 0).count() <= 1;
        let depth_done = self.params.max_depth.is_some_and(|m| depth >= m);
        if pure || depth_done || n < 2 * self.params.min_leaf {
            return self.leaf(counts);
        }
        let Some(best) = self.best_split(rows, &counts, impurity) else {
            return self.leaf(counts);
        };
        rows.sort_by(|&a, &b| {
            self.table
                .get(a, best.feature)
                .total_cmp(&self.table.get(b, best.feature))
                .then(a.cmp(&b))
        });
        let (l, r) = rows.split_at_mut(best.left_len);
        let left = self.grow(l, depth + 1);
        let right = self.grow(r, depth + 1);
        TreeNode::Split {
            feature: best.feature,
            threshold: best.threshold,
            n_samples: n,
            impurity,
            impurity_decrease: best.decrease,
            left: Box::new(left),
            right: Box::new(right),
        }
    }

    fn best_split(&mut self, rows: &[usize], counts: &[usize], impurity: f64) -> Option<Candidate> {
        let d = self.table.n_cols();
        let mut order: Vec<usize> = (0..d).collect();
        let budget = match self.sampler.as_mut() {
            Some(s) => {
                order.shuffle(s.rng);
                s.max_features.min(d)
            }
            None => d,
        };
        let mut best: Option<Candidate> = None;
        let mut sorted = rows.to_vec();
        for (visited, &f) in order.iter().enumerate() {
            // Past the feature budget, keep looking only until something splits.
            if visited >= budget && best.is_some() {
                break;
            }
            sorted.sort_by(|&a, &b| self.table.get(a, f).total_cmp(&self.table.get(b, f)));
            let n = sorted.len();
            let mut left = vec![0usize; self.n_classes];
            for p in 1..n {
                left[self.y[sorted[p - 1]]] += 1;
                let (lo, hi) = (self.table.get(sorted[p - 1], f), self.table.get(sorted[p], f));
                if lo == hi || p < self.params.min_leaf || n - p < self.params.min_leaf {
                    continue;
                }
                let right: Vec<usize> = counts.iter().zip(&left).map(|(c, l)| c - l).collect();
                let decrease = impurity
                    - (p as f64 / n as f64) * gini(&left, p)
                    - ((n - p) as f64 / n as f64) * gini(&right, n - p);
                let mut threshold = 0.5 * (lo + hi);
                if threshold >= hi {
                    threshold = lo;
                }
                let better = match &best {
                    None => true,
                    Some(b) => {
                        decrease > b.decrease
                            || (decrease == b.decrease
                                && (f < b.feature || (f == b.feature && threshold < b.threshold)))
                    }
                };
                if better {
                    best = Some(Candidate {
                        feature: f,
                        threshold,
                        decrease,
                        left_len: p,
                    });
                }
            }
        }
        best
    }
}

impl TreeNode {
    fn predict(&self, row: &[f64]) -> i32 {
        match self {
            TreeNode::Leaf { label, .. } => *label,
            TreeNode::Split {
                feature,
                threshold,
                left,
                right,
                ..
            } => {
                if row[*feature] <= *threshold {
                    left.predict(row)
                } else {
                    right.predict(row)
                }
            }
        }
    }

    fn depth(&self) -> usize {
        match self {
            TreeNode::Leaf { .. } => 0,
            TreeNode::Split { left, right, .. } => 1 + left.depth().max(right.depth()),
        }
    }

    fn leaves(&self) -> usize {
        match self {
            TreeNode::Leaf { .. } => 1,
            TreeNode::Split { left, right, .. } => left.leaves() + right.leaves(),
        }
    }

    /// Adds `n_node / n_root * decrease` per split feature.
    pub(crate) fn accumulate(&self, n_root: usize, out: &mut [f64]) {
        if let TreeNode::Split {
            feature,
            n_samples,
            impurity_decrease,
            left,
            right,
            ..
        } = self
        {
            out[*feature] += *n_samples as f64 / n_root as f64 * impurity_decrease.max(0.0);
            left.accumulate(n_root, out);
            right.accumulate(n_root, out);
        }
    }
}

impl DecisionTree {
    pub fn predict(&self, table: &FeatureTable) -> Result<LabelVector> {
        if table.n_cols() != self.features.len() {
            return Err(Error::DimensionMismatch {
                expected: self.features.len(),
                found: table.n_cols(),
            });
        }
        LabelVector::new(table.rows().map(|r| self.root.predict(r)).collect())
    }

    pub fn depth(&self) -> usize {
        self.root.depth()
    }

    pub fn n_leaves(&self) -> usize {
        self.root.leaves()
    }

    /// Impurity-decrease importances normalized to sum to one; all zero
    /// when the tree never split.
    pub fn importances(&self) -> Vec<f64> {
        let mut v = vec![0.0; self.features.len()];
        self.root.accumulate(self.n_samples, &mut v);
        let total: f64 = v.iter().sum();
        if total > 0.0 {
            v.iter_mut().for_each(|x| *x /= total);
        }
        v
    }

    /// Indented text, one node per line.
    pub fn render_text(&self) -> String {
        let mut out = String::new();
        self.text_node(&self.root, 0, "", &mut out);
        out
    }

    fn text_node(&self, node: &TreeNode, depth: usize, prefix: &str, out: &mut String) {
        let pad = "  ".repeat(depth);
        match node {
            TreeNode::Leaf { counts, label } => {
                let _ = writeln!(
                    out,
                    "{pad}{prefix}cluster {label} (samples={}, counts={counts:?})",
                    counts.iter().sum::<usize>()
                );
            }
            TreeNode::Split {
                feature,
                threshold,
                n_samples,
                impurity,
                left,
                right,
                ..
            } => {
                let _ = writeln!(
                    out,
                    "{pad}{prefix}{} <= {threshold} (samples={n_samples}, gini={impurity:.6})",
                    self.features[*feature]
                );
                self.text_node(left, depth + 1, "yes: ", out);
                self.text_node(right, depth + 1, "no: ", out);
            }
        }
    }

    /// Graphviz dot source.
    pub fn render_dot(&self) -> String {
        let mut out = String::from("digraph tree {\n  node [shape=box];\n");
        let mut next = 0usize;
        self.dot_node(&self.root, &mut next, &mut out);
        out.push_str("}\n");
        out
    }

    fn dot_node(&self, node: &TreeNode, next: &mut usize, out: &mut String) -> usize {
        let id = *next;
        *next += 1;
        match node {
            TreeNode::Leaf { counts, label } => {
                let _ = writeln!(
                    out,
                    "  n{id} [label=\"cluster {label}\\nsamples = {}\\ncounts = {counts:?}\"];",
                    counts.iter().sum::<usize>()
                );
            }
            TreeNode::Split {
                feature,
                threshold,
                n_samples,
                impurity,
                left,
                right,
                ..
            } => {
                let _ = writeln!(
                    out,
                    "  n{id} [label=\"{} <= {threshold}\\ngini = {impurity:.4}\\nsamples = {n_samples}\"];",
                    self.features[*feature].replace('"', "'")
                );
                let l = self.dot_node(left, next, out);
                let _ = writeln!(out, "  n{id} -> n{l} [label=\"yes\"];");
                let r = self.dot_node(right, next, out);
                let _ = writeln!(out, "  n{id} -> n{r} [label=\"no\"];");
            }
        }
        id
    }
}
