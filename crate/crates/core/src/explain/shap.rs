use serde::{Deserialize, Serialize};

use super::ExplainError;
use crate::matrix::Matrix;
use crate::models::{check_width, DecisionTree, Node, TreeEnsemble};

/// Per-row attributions on the ensemble's additive scale (log-odds for
/// boosting, probability for forests).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShapAttribution {
    pub base_value: f64,
    /// One row per explained row, one column per feature.
    pub phi: Matrix,
}

impl ShapAttribution {
    pub fn row(&self, r: usize) -> &[f64] {
        self.phi.row(r)
    }

    pub fn rows(&self) -> usize {
        self.phi.rows()
    }

    /// `base + Σ phi` for row `r`; equals the model's raw output.
    pub fn reconstruct(&self, r: usize) -> f64 {
        self.base_value + self.phi.row(r).iter().sum::<f64>()
    }
}

#[derive(Debug, Clone, Copy)]
struct PathElement {
    feature: Option<usize>,
    zero: f64,
    one: f64,
    weight: f64,
}

fn extend(path: &mut Vec<PathElement>, zero: f64, one: f64, feature: Option<usize>) {
    let depth = path.len();
    path.push(PathElement { feature, zero, one, weight: if depth == 0 { 1.0 } else { 0.0 } });
    let d = depth as f64;
    for i in (0..depth).rev() {
        let w = path[i].weight;
        path[i + 1].weight += one * w * (i as f64 + 1.0) / (d + 1.0);
        path[i].weight = zero * w * (d - i as f64) / (d + 1.0);
    }
}

fn unwind(path: &mut Vec<PathElement>, index: usize) {
    let depth = path.len() - 1;
    let d = depth as f64;
    let PathElement { one, zero, .. } = path[index];
    let mut next = path[depth].weight;
    for i in (0..depth).rev() {
        if one != 0.0 {
            let tmp = path[i].weight;
            path[i].weight = next * (d + 1.0) / ((i as f64 + 1.0) * one);
            next = tmp - path[i].weight * zero * (d - i as f64) / (d + 1.0);
        } else {
            path[i].weight = path[i].weight * (d + 1.0) / (zero * (d - i as f64));
        }
    }
    for i in index..depth {
        path[i].feature = path[i + 1].feature;
        path[i].zero = path[i + 1].zero;
        path[i].one = path[i + 1].one;
    }
    path.pop();
}

fn unwound_sum(path: &[PathElement], index: usize) -> f64 {
    let depth = path.len() - 1;
    let d = depth as f64;
    let PathElement { one, zero, .. } = path[index];
    let mut next = path[depth].weight;
    let mut total = 0.0;
    for i in (0..depth).rev() {
        if one != 0.0 {
            let tmp = next * (d + 1.0) / ((i as f64 + 1.0) * one);
            total += tmp;
            next = path[i].weight - tmp * zero * (d - i as f64) / (d + 1.0);
        } else if zero != 0.0 {
            total += path[i].weight / zero / ((d - i as f64) / (d + 1.0));
        }
    }
    total
}

#[allow(clippy::too_many_arguments)]
fn recurse(
    tree: &DecisionTree,
    row: &[f64],
    phi: &mut [f64],
    node: usize,
    mut path: Vec<PathElement>,
    zero: f64,
    one: f64,
    feature: Option<usize>,
) {
    extend(&mut path, zero, one, feature);
    match *tree.node(node) {
        Node::Leaf { value, .. } => {
            for i in 1..path.len() {
                let w = unwound_sum(&path, i);
                let el = path[i];
                if let Some(f) = el.feature {
                    phi[f] += w * (el.one - el.zero) * value;
                }
            }
        }
        Node::Split { feature: split, threshold, left, right, cover } => {
            let (hot, cold) = if row[split] <= threshold { (left, right) } else { (right, left) };
            let (mut in_zero, mut in_one) = (1.0, 1.0);
            if let Some(k) = (1..path.len()).find(|&k| path[k].feature == Some(split)) {
                in_zero = path[k].zero;
                in_one = path[k].one;
                unwind(&mut path, k);
            }
            let total = cover as f64;
            let hot_frac = tree.node(hot).cover() as f64 / total;
            let cold_frac = tree.node(cold).cover() as f64 / total;
            recurse(tree, row, phi, hot, path.clone(), hot_frac * in_zero, in_one, Some(split));
            recurse(tree, row, phi, cold, path, cold_frac * in_zero, 0.0, Some(split));
        }
    }
}

fn check_covers(tree: &DecisionTree, index: usize) -> Result<(), ExplainError> {
    match tree.nodes().iter().position(|n| n.cover() == 0) {
        Some(node) => Err(ExplainError::ZeroCover { tree: index, node }),
        None => Ok(()),
    }
}

/// Unscaled attributions of one tree for one row; `phi` has `n_features` entries.
pub fn tree_shap_single(tree: &DecisionTree, row: &[f64]) -> Result<Vec<f64>, ExplainError> {
    check_covers(tree, 0)?;
    let mut phi = vec![0.0; row.len()];
    recurse(tree, row, &mut phi, 0, Vec::with_capacity(tree.depth() + 2), 1.0, 1.0, None);
    Ok(phi)
}

fn accumulate(ensemble: &TreeEnsemble, row: &[f64], phi: &mut [f64]) {
    let w = ensemble.tree_weight();
    let mut scratch = vec![0.0; phi.len()];
    for tree in &ensemble.trees {
        scratch.iter_mut().for_each(|v| *v = 0.0);
        recurse(tree, row, &mut scratch, 0, Vec::with_capacity(tree.depth() + 2), 1.0, 1.0, None);
        for (p, s) in phi.iter_mut().zip(&scratch) {
            *p += w * s;
        }
    }
}

fn base_value(ensemble: &TreeEnsemble) -> f64 {
    ensemble.base_score + ensemble.tree_weight() * ensemble.trees.iter().map(|t| t.expected_value()).sum::<f64>()
}

fn check_ensemble(ensemble: &TreeEnsemble) -> Result<(), ExplainError> {
    ensemble.trees.iter().enumerate().try_for_each(|(i, t)| check_covers(t, i))
}

/// Attributions and base value for a single row.
pub fn tree_shap_row(ensemble: &TreeEnsemble, row: &[f64]) -> Result<(Vec<f64>, f64), ExplainError> {
    check_ensemble(ensemble)?;
    if row.len() != ensemble.n_features {
        return Err(crate::models::ModelError::WidthMismatch { expected: ensemble.n_features, found: row.len() }.into());
    }
    let mut phi = vec![0.0; row.len()];
    accumulate(ensemble, row, &mut phi);
    Ok((phi, base_value(ensemble)))
}

pub fn tree_shap(ensemble: &TreeEnsemble, rows: &Matrix) -> Result<ShapAttribution, ExplainError> {
    check_ensemble(ensemble)?;
    check_width(rows, ensemble.n_features)?;
    let mut phi = Matrix::zeros(rows.rows(), rows.cols());
    for r in 0..rows.rows() {
        accumulate(ensemble, rows.row(r), phi.row_mut(r));
    }
    Ok(ShapAttribution { base_value: base_value(ensemble), phi })
}
