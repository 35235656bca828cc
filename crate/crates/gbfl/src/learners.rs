//! Transparent learners: a height-capped CART decision tree and an
//! L1-regularized multinomial logistic model.
//!
//! Both run over boolean clause features; the tree also runs over raw
//! numeric features (threshold splits at midpoints of consecutive unique
//! values) for the comparison baselines. Fitting is exhaustive and
//! deterministic: ties break toward the lowest column index, then the lowest
//! threshold, and predictions break argmax ties toward the lowest class id.

use std::path::Path;

use ndarray::{Array1, Array2, ArrayView1, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::clauses::{clause_matrix, Clause};
use crate::error::{GbflError, Result};

/// Tree fitting settings. `seed` is recorded for provenance; the split
/// search itself is deterministic and uses no randomness.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TreeConfig {
    pub max_height: usize,
    pub min_leaf: usize,
    pub seed: u64,
}

impl Default for TreeConfig {
    fn default() -> Self {
        TreeConfig {
            max_height: 5,
            min_leaf: 1,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "node")]
pub enum TreeNode {
    /// Go left when `value <= threshold`, right otherwise. Boolean columns
    /// use threshold 0.5, so 0 goes left and 1 goes right.
    Split {
        column: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
    Leaf { counts: Vec<usize> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionTree {
    nodes: Vec<TreeNode>,
    height: usize,
    n_columns: usize,
    n_classes: usize,
    seed: u64,
}

/// What split points a column offers.
#[derive(Clone, Copy, PartialEq)]
enum SplitSearch {
    /// Membership test only (boolean clause columns).
    Boolean,
    /// Exhaustive thresholds at midpoints of consecutive unique values.
    Thresholds,
}

fn gini(counts: &[usize]) -> f64 {
    let n: usize = counts.iter().sum();
    if n == 0 {
        return 0.0;
    }
    let n = n as f64;
    1.0 - counts
        .iter()
        .map(|&c| {
            let p = c as f64 / n;
            p * p
        })
        .sum::<f64>()
}

struct TreeBuilder<'a> {
    features: ArrayView2<'a, f64>,
    labels: &'a [usize],
    n_classes: usize,
    max_height: usize,
    min_leaf: usize,
    search: SplitSearch,
    nodes: Vec<TreeNode>,
    height: usize,
}

impl<'a> TreeBuilder<'a> {
    fn counts(&self, indices: &[usize]) -> Vec<usize> {
        let mut counts = vec![0usize; self.n_classes];
        for &i in indices {
            counts[self.labels[i]] += 1;
        }
        counts
    }

    /// Best (column, threshold, gain) over all candidate splits, requiring
    /// both children to hold at least `min_leaf` samples. Zero-gain splits
    /// are allowed as long as they separate the node, so parity-style
    /// targets (where no single column helps) remain learnable. Ties keep
    /// the lowest column index, then the lowest threshold.
    fn best_split(&self, indices: &[usize]) -> Option<(usize, f64, f64)> {
        let parent_gini = gini(&self.counts(indices));
        let n = indices.len() as f64;
        let mut best: Option<(usize, f64, f64)> = None;
        let consider = |column: usize,
                            threshold: f64,
                            left_counts: &[usize],
                            right_counts: &[usize],
                            best: &mut Option<(usize, f64, f64)>| {
            let n_left: usize = left_counts.iter().sum();
            let n_right: usize = right_counts.iter().sum();
            if n_left < self.min_leaf || n_right < self.min_leaf {
                return;
            }
            let gain = parent_gini
                - (n_left as f64 / n) * gini(left_counts)
                - (n_right as f64 / n) * gini(right_counts);
            let better = match best {
                None => true,
                Some((_, _, best_gain)) => gain > *best_gain + 1e-15,
            };
            if better {
                *best = Some((column, threshold, gain));
            }
        };
        for column in 0..self.features.ncols() {
            match self.search {
                SplitSearch::Boolean => {
                    let mut left_counts = vec![0usize; self.n_classes];
                    let mut right_counts = vec![0usize; self.n_classes];
                    for &i in indices {
                        if self.features[[i, column]] <= 0.5 {
                            left_counts[self.labels[i]] += 1;
                        } else {
                            right_counts[self.labels[i]] += 1;
                        }
                    }
                    consider(column, 0.5, &left_counts, &right_counts, &mut best);
                }
                SplitSearch::Thresholds => {
                    // Single sorted sweep with incremental class counts.
                    let mut pairs: Vec<(f64, usize)> = indices
                        .iter()
                        .map(|&i| (self.features[[i, column]], self.labels[i]))
                        .collect();
                    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
                    let mut left_counts = vec![0usize; self.n_classes];
                    let mut right_counts = self.counts(indices);
                    for w in 0..pairs.len() - 1 {
                        let (value, label) = pairs[w];
                        left_counts[label] += 1;
                        right_counts[label] -= 1;
                        let next_value = pairs[w + 1].0;
                        if next_value > value {
                            let threshold = 0.5 * (value + next_value);
                            consider(column, threshold, &left_counts, &right_counts, &mut best);
                        }
                    }
                }
            }
        }
        best
    }

    fn build(&mut self, indices: &[usize], depth: usize) -> usize {
        let counts = self.counts(indices);
        let pure = counts.iter().filter(|&&c| c > 0).count() <= 1;
        let split = if pure || depth >= self.max_height || indices.len() < 2 * self.min_leaf {
            None
        } else {
            self.best_split(indices)
        };
        match split {
            None => {
                self.height = self.height.max(depth);
                self.nodes.push(TreeNode::Leaf { counts });
                self.nodes.len() - 1
            }
            Some((column, threshold, _)) => {
                let (left_idx, right_idx): (Vec<usize>, Vec<usize>) = indices
                    .iter()
                    .partition(|&&i| self.features[[i, column]] <= threshold);
                let left = self.build(&left_idx, depth + 1);
                let right = self.build(&right_idx, depth + 1);
                self.nodes.push(TreeNode::Split {
                    column,
                    threshold,
                    left,
                    right,
                });
                self.nodes.len() - 1
            }
        }
    }
}

fn fit_tree_impl<'a>(
    features: ArrayView2<'a, f64>,
    labels: &'a [usize],
    n_classes: usize,
    config: &TreeConfig,
    search: SplitSearch,
) -> Result<DecisionTree> {
    if features.nrows() == 0 || features.nrows() != labels.len() {
        return Err(GbflError::EmptyDataset(
            "tree fitting needs a non-empty, aligned dataset".into(),
        ));
    }
    if config.min_leaf == 0 {
        return Err(GbflError::InvalidArgument("min_leaf must be >= 1".into()));
    }
    let mut builder = TreeBuilder {
        features,
        labels,
        n_classes,
        max_height: config.max_height,
        min_leaf: config.min_leaf,
        search,
        nodes: Vec::new(),
        height: 0,
    };
    let indices: Vec<usize> = (0..features.nrows()).collect();
    let root = builder.build(&indices, 0);
    // Nodes are pushed children-first; re-rooting keeps lookups simple.
    let mut tree = DecisionTree {
        nodes: builder.nodes,
        height: builder.height,
        n_columns: features.ncols(),
        n_classes,
        seed: config.seed,
    };
    // Move the root to index 0 by swapping and fixing child links.
    if root != 0 {
        tree.nodes.swap(0, root);
        for node in &mut tree.nodes {
            if let TreeNode::Split { left, right, .. } = node {
                for child in [left, right] {
                    if *child == 0 {
                        *child = root;
                    } else if *child == root {
                        *child = 0;
                    }
                }
            }
        }
    }
    Ok(tree)
}

/// Fit a CART tree on boolean clause columns.
pub fn fit_tree(
    matrix: ArrayView2<'_, u8>,
    labels: &[usize],
    n_classes: usize,
    config: &TreeConfig,
) -> Result<DecisionTree> {
    let features = matrix.mapv(|v| v as f64);
    fit_tree_impl(features.view(), labels, n_classes, config, SplitSearch::Boolean)
}

/// Fit a CART tree on raw numeric features with exhaustive midpoint
/// threshold search.
pub fn fit_tree_raw<'a>(
    features: ArrayView2<'a, f64>,
    labels: &'a [usize],
    n_classes: usize,
    config: &TreeConfig,
) -> Result<DecisionTree> {
    fit_tree_impl(features, labels, n_classes, config, SplitSearch::Thresholds)
}

impl DecisionTree {
    pub fn height(&self) -> usize {
        self.height
    }

    pub fn n_columns(&self) -> usize {
        self.n_columns
    }

    pub fn n_classes(&self) -> usize {
        self.n_classes
    }

    pub fn predict_row(&self, row: ArrayView1<'_, f64>) -> Result<usize> {
        if row.len() != self.n_columns {
            return Err(GbflError::DimensionMismatch {
                expected: self.n_columns,
                got: row.len(),
            });
        }
        let mut node = 0usize;
        loop {
            match &self.nodes[node] {
                TreeNode::Split {
                    column,
                    threshold,
                    left,
                    right,
                } => {
                    node = if row[*column] <= *threshold { *left } else { *right };
                }
                TreeNode::Leaf { counts } => {
                    let mut best = 0;
                    for (c, &count) in counts.iter().enumerate() {
                        if count > counts[best] {
                            best = c;
                        }
                    }
                    return Ok(best);
                }
            }
        }
    }

    pub fn predict_bool(&self, row: ArrayView1<'_, u8>) -> Result<usize> {
        let as_f64 = row.mapv(|v| v as f64);
        self.predict_row(as_f64.view())
    }

    /// Total Gini importance per column: impurity decrease weighted by the
    /// fraction of samples reaching the node, summed over splits.
    pub fn gini_importances(&self) -> Vec<f64> {
        let mut importances = vec![0.0; self.n_columns];
        let total = self.node_size(0) as f64;
        let mut stack = vec![0usize];
        while let Some(node) = stack.pop() {
            if let TreeNode::Split {
                column, left, right, ..
            } = &self.nodes[node]
            {
                let (n, g) = self.node_stats(node);
                let (nl, gl) = self.node_stats(*left);
                let (nr, gr) = self.node_stats(*right);
                let gain = g - (nl / n) * gl - (nr / n) * gr;
                importances[*column] += (n / total) * gain;
                stack.push(*left);
                stack.push(*right);
            }
        }
        importances
    }

    fn node_size(&self, node: usize) -> usize {
        match &self.nodes[node] {
            TreeNode::Leaf { counts } => counts.iter().sum(),
            TreeNode::Split { left, right, .. } => {
                self.node_size(*left) + self.node_size(*right)
            }
        }
    }

    fn node_counts(&self, node: usize) -> Vec<usize> {
        match &self.nodes[node] {
            TreeNode::Leaf { counts } => counts.clone(),
            TreeNode::Split { left, right, .. } => {
                let mut counts = self.node_counts(*left);
                for (a, b) in counts.iter_mut().zip(self.node_counts(*right)) {
                    *a += b;
                }
                counts
            }
        }
    }

    fn node_stats(&self, node: usize) -> (f64, f64) {
        let counts = self.node_counts(node);
        (counts.iter().sum::<usize>() as f64, gini(&counts))
    }

    /// Columns appearing in at least one split.
    pub fn used_columns(&self) -> Vec<bool> {
        let mut used = vec![false; self.n_columns];
        for node in &self.nodes {
            if let TreeNode::Split { column, .. } = node {
                used[*column] = true;
            }
        }
        used
    }

    /// Indented if/else rendering over column names.
    pub fn render(&self, column_names: &[String]) -> String {
        let mut out = String::new();
        self.render_node(0, 0, column_names, &mut out);
        out
    }

    fn render_node(&self, node: usize, depth: usize, names: &[String], out: &mut String) {
        let pad = "  ".repeat(depth);
        match &self.nodes[node] {
            TreeNode::Leaf { counts } => {
                let mut best = 0;
                for (c, &count) in counts.iter().enumerate() {
                    if count > counts[best] {
                        best = c;
                    }
                }
                out.push_str(&format!("{pad}predict class {best}  (counts {counts:?})\n"));
            }
            TreeNode::Split {
                column,
                threshold,
                left,
                right,
            } => {
                let name = names.get(*column).map(|s| s.as_str()).unwrap_or("?");
                out.push_str(&format!("{pad}if {name} <= {threshold:.2}:\n"));
                self.render_node(*left, depth + 1, names, out);
                out.push_str(&format!("{pad}else:\n"));
                self.render_node(*right, depth + 1, names, out);
            }
        }
    }
}

// ---------------------------------------------------------------------------
// L1 multinomial logistic regression over boolean columns.
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogisticModel {
    /// K x F weight matrix.
    weights: Array2<f64>,
    intercepts: Array1<f64>,
    l1: f64,
}

/// Proximal gradient descent (full-batch, soft-threshold on the weights only)
/// on multinomial cross-entropy. Weights start at zero, so zero epochs give
/// the uniform-score model. The regularized loss is non-increasing across
/// epochs via step backoff.
pub fn fit_logistic_l1(
    matrix: ArrayView2<'_, u8>,
    labels: &[usize],
    n_classes: usize,
    l1: f64,
    epochs: usize,
    learning_rate: f64,
    _seed: u64,
) -> Result<LogisticModel> {
    if matrix.nrows() == 0 || matrix.nrows() != labels.len() {
        return Err(GbflError::EmptyDataset(
            "logistic fitting needs a non-empty, aligned dataset".into(),
        ));
    }
    if l1 < 0.0 || learning_rate <= 0.0 {
        return Err(GbflError::InvalidArgument(
            "need l1 >= 0 and learning_rate > 0".into(),
        ));
    }
    let x = matrix.mapv(|v| v as f64);
    let n = x.nrows() as f64;
    let f = x.ncols();
    let mut weights = Array2::zeros((n_classes, f));
    let mut intercepts = Array1::zeros(n_classes);

    let loss_of = |w: &Array2<f64>, b: &Array1<f64>| -> f64 {
        let mut scores = x.dot(&w.t());
        for mut row in scores.rows_mut() {
            row += b;
        }
        let mut loss = 0.0;
        for (i, &y) in labels.iter().enumerate() {
            let row = scores.row(i);
            let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let logsum = row.iter().map(|v| (v - max).exp()).sum::<f64>().ln() + max;
            loss += logsum - row[y];
        }
        loss / n + l1 * w.iter().map(|v| v.abs()).sum::<f64>()
    };

    let mut current_loss = loss_of(&weights, &intercepts);
    for _ in 0..epochs {
        let mut scores = x.dot(&weights.t());
        for mut row in scores.rows_mut() {
            row += &intercepts;
        }
        // softmax rows in place
        for mut row in scores.rows_mut() {
            let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            row.mapv_inplace(|v| (v - max).exp());
            let sum = row.sum();
            row.mapv_inplace(|v| v / sum);
        }
        for (i, &y) in labels.iter().enumerate() {
            scores[[i, y]] -= 1.0;
        }
        let grad_w = scores.t().dot(&x) / n;
        let grad_b = scores.sum_axis(ndarray::Axis(0)) / n;

        let mut step = learning_rate;
        for _ in 0..24 {
            let mut w_next = &weights - &(&grad_w * step);
            w_next.mapv_inplace(|v| v.signum() * (v.abs() - step * l1).max(0.0));
            let b_next = &intercepts - &(&grad_b * step);
            let next_loss = loss_of(&w_next, &b_next);
            if !next_loss.is_finite() {
                return Err(GbflError::Divergence { epoch: 0 });
            }
            if next_loss <= current_loss + 1e-12 {
                weights = w_next;
                intercepts = b_next;
                current_loss = next_loss;
                break;
            }
            step *= 0.5;
        }
    }
    Ok(LogisticModel {
        weights,
        intercepts,
        l1,
    })
}

impl LogisticModel {
    pub fn n_columns(&self) -> usize {
        self.weights.ncols()
    }

    pub fn weights(&self) -> &Array2<f64> {
        &self.weights
    }

    pub fn intercepts(&self) -> &Array1<f64> {
        &self.intercepts
    }

    pub fn predict_bool(&self, row: ArrayView1<'_, u8>) -> Result<usize> {
        if row.len() != self.weights.ncols() {
            return Err(GbflError::DimensionMismatch {
                expected: self.weights.ncols(),
                got: row.len(),
            });
        }
        let mut best = 0;
        let mut best_score = f64::NEG_INFINITY;
        for c in 0..self.weights.nrows() {
            let mut score = self.intercepts[c];
            for (j, &v) in row.iter().enumerate() {
                if v != 0 {
                    score += self.weights[[c, j]];
                }
            }
            if score > best_score {
                best_score = score;
                best = c;
            }
        }
        Ok(best)
    }

    /// Per-column importance: max over classes of |weight|.
    pub fn importances(&self) -> Vec<f64> {
        (0..self.weights.ncols())
            .map(|j| {
                (0..self.weights.nrows())
                    .map(|c| self.weights[[c, j]].abs())
                    .fold(0.0, f64::max)
            })
            .collect()
    }

    /// Columns with a nonzero weight in any class.
    pub fn used_columns(&self) -> Vec<bool> {
        self.importances().iter().map(|&v| v > 0.0).collect()
    }
}

/// Ranked `(column, importance)` pairs over the columns the model actually
/// uses, ties by column index, truncated to `k`.
pub fn top_k_columns(importances: &[f64], used: &[bool], k: usize) -> Vec<(usize, f64)> {
    let mut ranked: Vec<(usize, f64)> = importances
        .iter()
        .copied()
        .enumerate()
        .filter(|&(j, _)| used.get(j).copied().unwrap_or(false))
        .collect();
    ranked.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    ranked.truncate(k);
    ranked
}

// ---------------------------------------------------------------------------
// A fitted transparent model with whatever feature routing it needs.
// ---------------------------------------------------------------------------

/// A transparent model bundled with its input encoding: clause-based models
/// first evaluate the raw vector through their clauses, raw trees consume
/// the features directly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TransparentModel {
    ClauseTree {
        tree: DecisionTree,
        clauses: Vec<Clause>,
    },
    ClauseLogistic {
        model: LogisticModel,
        clauses: Vec<Clause>,
    },
    RawTree { tree: DecisionTree },
}

impl TransparentModel {
    /// Predict from a raw feature vector, routing through clause evaluation
    /// when the model consumes boolean features.
    pub fn predict_raw(&self, x: ArrayView1<'_, f64>) -> Result<usize> {
        match self {
            TransparentModel::RawTree { tree } => tree.predict_row(x),
            TransparentModel::ClauseTree { tree, clauses } => {
                let row = clause_row(clauses, x)?;
                tree.predict_bool(Array1::from_vec(row).view())
            }
            TransparentModel::ClauseLogistic { model, clauses } => {
                let row = clause_row(clauses, x)?;
                model.predict_bool(Array1::from_vec(row).view())
            }
        }
    }

    pub fn predict_raw_batch(&self, features: ArrayView2<'_, f64>) -> Result<Vec<usize>> {
        match self {
            TransparentModel::RawTree { tree } => features
                .rows()
                .into_iter()
                .map(|row| tree.predict_row(row))
                .collect(),
            TransparentModel::ClauseTree { tree, clauses } => {
                let matrix = clause_matrix(clauses, features)?;
                matrix
                    .rows()
                    .into_iter()
                    .map(|row| tree.predict_bool(row))
                    .collect()
            }
            TransparentModel::ClauseLogistic { model, clauses } => {
                let matrix = clause_matrix(clauses, features)?;
                matrix
                    .rows()
                    .into_iter()
                    .map(|row| model.predict_bool(row))
                    .collect()
            }
        }
    }

    pub fn clauses(&self) -> Option<&[Clause]> {
        match self {
            TransparentModel::ClauseTree { clauses, .. }
            | TransparentModel::ClauseLogistic { clauses, .. } => Some(clauses),
            TransparentModel::RawTree { .. } => None,
        }
    }

    pub fn tree(&self) -> Option<&DecisionTree> {
        match self {
            TransparentModel::ClauseTree { tree, .. } | TransparentModel::RawTree { tree } => {
                Some(tree)
            }
            TransparentModel::ClauseLogistic { .. } => None,
        }
    }

    /// Column importances in the model's own feature space.
    pub fn importances(&self) -> Vec<f64> {
        match self {
            TransparentModel::ClauseTree { tree, .. } | TransparentModel::RawTree { tree } => {
                tree.gini_importances()
            }
            TransparentModel::ClauseLogistic { model, .. } => model.importances(),
        }
    }

    /// Columns the model actually consults.
    pub fn used_columns(&self) -> Vec<bool> {
        match self {
            TransparentModel::ClauseTree { tree, .. } | TransparentModel::RawTree { tree } => {
                tree.used_columns()
            }
            TransparentModel::ClauseLogistic { model, .. } => model.used_columns(),
        }
    }
}

fn clause_row(clauses: &[Clause], x: ArrayView1<'_, f64>) -> Result<Vec<u8>> {
    clauses
        .iter()
        .map(|c| crate::clauses::evaluate_clause(c, x))
        .collect()
}

#[derive(Serialize, Deserialize)]
struct SavedTransparentModel {
    schema_version: u32,
    method: String,
    feature_names: Vec<String>,
    model: TransparentModel,
}

pub fn save_transparent_model(
    model: &TransparentModel,
    method: &str,
    feature_names: &[String],
    path: impl AsRef<Path>,
) -> Result<()> {
    let path_str = path.as_ref().display().to_string();
    let saved = SavedTransparentModel {
        schema_version: 1,
        method: method.to_string(),
        feature_names: feature_names.to_vec(),
        model: model.clone(),
    };
    std::fs::write(path.as_ref(), serde_json::to_vec_pretty(&saved)?)
        .map_err(|e| GbflError::io(path_str, e))
}

pub fn load_transparent_model(
    path: impl AsRef<Path>,
) -> Result<(TransparentModel, String, Vec<String>)> {
    let path_str = path.as_ref().display().to_string();
    let bytes = std::fs::read(path.as_ref()).map_err(|e| GbflError::io(path_str, e))?;
    let saved: SavedTransparentModel = serde_json::from_slice(&bytes)?;
    Ok((saved.model, saved.method, saved.feature_names))
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn pure_labels_give_single_leaf() {
        let matrix = array![[0u8, 1], [1, 0], [1, 1]];
        let tree = fit_tree(matrix.view(), &[1, 1, 1], 2, &TreeConfig::default()).unwrap();
        assert_eq!(tree.height(), 0);
        assert_eq!(tree.predict_bool(array![0u8, 0].view()).unwrap(), 1);
    }

    #[test]
    fn xor_needs_height_two() {
        let matrix = array![[0u8, 0], [0, 1], [1, 0], [1, 1]];
        let labels = [0usize, 1, 1, 0];
        let tree = fit_tree(matrix.view(), &labels, 2, &TreeConfig::default()).unwrap();
        assert_eq!(tree.height(), 2);
        // Exhaustive truth-table check.
        for (i, row) in matrix.rows().into_iter().enumerate() {
            assert_eq!(tree.predict_bool(row).unwrap(), labels[i]);
        }
        // Both columns are split on (the root split has zero Gini gain, so
        // ranking still lists it via column usage).
        assert_eq!(tree.used_columns(), vec![true, true]);
        let ranked = top_k_columns(&tree.gini_importances(), &tree.used_columns(), 5);
        assert_eq!(ranked.len(), 2);
        assert!(ranked[0].1 > 0.0);
    }

    #[test]
    fn single_informative_column_becomes_a_stump() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let matrix = Array2::from_shape_fn((30, 5), |_| rng.gen_range(0..=1) as u8);
        let labels: Vec<usize> = (0..30).map(|i| matrix[[i, 3]] as usize).collect();
        let tree = fit_tree(matrix.view(), &labels, 2, &TreeConfig::default()).unwrap();
        match &tree.nodes[0] {
            TreeNode::Split { column, .. } => assert_eq!(*column, 3),
            other => panic!("expected root split, got {other:?}"),
        }
        for (i, row) in matrix.rows().into_iter().enumerate() {
            assert_eq!(tree.predict_bool(row).unwrap(), labels[i]);
        }
        let ranked = top_k_columns(&tree.gini_importances(), &tree.used_columns(), 1);
        assert_eq!(ranked[0].0, 3);
    }

    #[test]
    fn height_cap_is_respected_on_random_data() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for trial in 0..50 {
            let n = rng.gen_range(4..60);
            let cols = rng.gen_range(1..8);
            let cap = rng.gen_range(0..5);
            let matrix = Array2::from_shape_fn((n, cols), |_| rng.gen_range(0..=1) as u8);
            let labels: Vec<usize> = (0..n).map(|_| rng.gen_range(0..3)).collect();
            let cfg = TreeConfig {
                max_height: cap,
                ..TreeConfig::default()
            };
            let tree = fit_tree(matrix.view(), &labels, 3, &cfg).unwrap();
            assert!(tree.height() <= cap, "trial {trial}: {} > {cap}", tree.height());
        }
    }

    #[test]
    fn fitting_is_deterministic() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let matrix = Array2::from_shape_fn((40, 6), |_| rng.gen_range(0..=1) as u8);
        let labels: Vec<usize> = (0..40).map(|_| rng.gen_range(0..2)).collect();
        let a = fit_tree(matrix.view(), &labels, 2, &TreeConfig::default()).unwrap();
        let b = fit_tree(matrix.view(), &labels, 2, &TreeConfig::default()).unwrap();
        assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
    }

    #[test]
    fn raw_tree_splits_at_midpoint() {
        let features = array![[1.0], [2.0], [3.0], [7.0], [8.0], [9.0]];
        let labels = [0usize, 0, 0, 1, 1, 1];
        let tree =
            fit_tree_raw(features.view(), &labels, 2, &TreeConfig::default()).unwrap();
        match &tree.nodes[0] {
            TreeNode::Split { threshold, .. } => {
                assert_eq!(*threshold, 5.0);
            }
            other => panic!("expected split, got {other:?}"),
        }
        assert_eq!(tree.predict_row(array![4.9].view()).unwrap(), 0);
        assert_eq!(tree.predict_row(array![5.1].view()).unwrap(), 1);
    }

    #[test]
    fn full_shrinkage_gives_majority_class_model() {
        let matrix = array![[1u8, 0], [0, 1], [1, 1], [0, 0], [1, 0]];
        let labels = [1usize, 0, 1, 1, 0];
        let n = matrix.nrows() as f64;
        let model =
            fit_logistic_l1(matrix.view(), &labels, 2, n, 200, 0.5, 0).unwrap();
        assert!(model.weights().iter().all(|&w| w == 0.0));
        // Majority class is 1 (three of five).
        for row in matrix.rows() {
            assert_eq!(model.predict_bool(row).unwrap(), 1);
        }
    }

    #[test]
    fn zero_epochs_predicts_class_zero() {
        let matrix = array![[1u8], [0]];
        let model = fit_logistic_l1(matrix.view(), &[1, 0], 2, 0.01, 0, 0.5, 0).unwrap();
        assert!(model.weights().iter().all(|&w| w == 0.0));
        assert_eq!(model.predict_bool(array![1u8].view()).unwrap(), 0);
        assert_eq!(model.predict_bool(array![0u8].view()).unwrap(), 0);
    }

    #[test]
    fn separating_column_dominates_weights() {
        // Column 1 perfectly separates; columns 0 and 2 are noise.
        let matrix = array![
            [1u8, 0, 1],
            [0, 0, 0],
            [1, 0, 0],
            [0, 0, 1],
            [1, 1, 1],
            [0, 1, 0],
            [1, 1, 0],
            [0, 1, 1],
            [1, 1, 1],
            [0, 0, 0]
        ];
        let labels: Vec<usize> = matrix.column(1).iter().map(|&v| v as usize).collect();
        let model =
            fit_logistic_l1(matrix.view(), &labels, 2, 0.01, 400, 0.5, 0).unwrap();
        let importances = model.importances();
        let ranked = top_k_columns(&importances, &model.used_columns(), 1);
        assert_eq!(ranked[0].0, 1, "importances {importances:?}");
        // Exhaustive small-grid oracle on a single-column logistic: the
        // best single column to explain these labels is column 1.
        let mut best_col = 0;
        let mut best_acc = 0.0;
        for j in 0..3 {
            let correct = matrix
                .column(j)
                .iter()
                .zip(&labels)
                .filter(|&(&v, &y)| v as usize == y)
                .count();
            let acc = correct as f64 / labels.len() as f64;
            if acc > best_acc {
                best_acc = acc;
                best_col = j;
            }
        }
        assert_eq!(best_col, 1);
    }

    #[test]
    fn logistic_loss_is_monotone() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let matrix = Array2::from_shape_fn((30, 4), |_| rng.gen_range(0..=1) as u8);
        let labels: Vec<usize> = (0..30).map(|_| rng.gen_range(0..3)).collect();
        // Refit with increasing epoch budgets; the final loss must be
        // non-increasing in the budget since every epoch is a descent step.
        let loss_at = |epochs: usize| -> f64 {
            let model =
                fit_logistic_l1(matrix.view(), &labels, 3, 0.05, epochs, 0.5, 0).unwrap();
            let x = matrix.mapv(|v| v as f64);
            let mut loss = 0.0;
            for (i, &y) in labels.iter().enumerate() {
                let row = x.row(i);
                let scores: Vec<f64> = (0..3)
                    .map(|c| {
                        model.intercepts()[c]
                            + row
                                .iter()
                                .enumerate()
                                .map(|(j, &v)| v * model.weights()[[c, j]])
                                .sum::<f64>()
                    })
                    .collect();
                let max = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                let logsum =
                    scores.iter().map(|v| (v - max).exp()).sum::<f64>().ln() + max;
                loss += logsum - scores[y];
            }
            loss / 30.0 + 0.05 * model.weights().iter().map(|v| v.abs()).sum::<f64>()
        };
        let mut prev = loss_at(0);
        for epochs in [1, 2, 5, 10, 25] {
            let l = loss_at(epochs);
            assert!(l <= prev + 1e-9, "loss rose from {prev} to {l}");
            prev = l;
        }
    }

    #[test]
    fn logistic_is_permutation_equivariant() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let matrix = Array2::from_shape_fn((24, 3), |_| rng.gen_range(0..=1) as u8);
        let labels: Vec<usize> = (0..24).map(|_| rng.gen_range(0..2)).collect();
        let model = fit_logistic_l1(matrix.view(), &labels, 2, 0.02, 100, 0.5, 0).unwrap();
        // Swap columns 0 and 2.
        let mut permuted = matrix.clone();
        for i in 0..matrix.nrows() {
            permuted[[i, 0]] = matrix[[i, 2]];
            permuted[[i, 2]] = matrix[[i, 0]];
        }
        let model_p =
            fit_logistic_l1(permuted.view(), &labels, 2, 0.02, 100, 0.5, 0).unwrap();
        let imp = model.importances();
        let imp_p = model_p.importances();
        assert!((imp[0] - imp_p[2]).abs() < 1e-9);
        assert!((imp[2] - imp_p[0]).abs() < 1e-9);
        assert!((imp[1] - imp_p[1]).abs() < 1e-9);
    }

    #[test]
    fn transparent_model_round_trips() {
        let matrix = array![[0u8, 1], [1, 0], [1, 1], [0, 0]];
        let labels = [0usize, 1, 1, 0];
        let tree = fit_tree(matrix.view(), &labels, 2, &TreeConfig::default()).unwrap();
        let model = TransparentModel::ClauseTree {
            tree,
            clauses: Vec::new(),
        };
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.json");
        save_transparent_model(&model, "GBFL", &["a".into(), "b".into()], &path).unwrap();
        let (loaded, method, names) = load_transparent_model(&path).unwrap();
        assert_eq!(loaded, model);
        assert_eq!(method, "GBFL");
        assert_eq!(names, vec!["a".to_string(), "b".to_string()]);
    }
}
