//! Gradient boosting on binomial deviance with Newton leaf values.

use serde::{Deserialize, Serialize};

use super::tree::{Criterion, TreeBuilder};
use super::{both_classes, check_training, ModelError, TreeEnsemble};
use crate::matrix::Matrix;
use crate::stats::{logit, sigmoid, softplus};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoostingParams {
    pub n_estimators: usize,
    pub learning_rate: f64,
    pub max_depth: usize,
    pub min_samples_leaf: usize,
}

impl Default for BoostingParams {
    fn default() -> Self {
        Self { n_estimators: 200, learning_rate: 0.05, max_depth: 4, min_samples_leaf: 10 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoostingFit {
    pub ensemble: TreeEnsemble,
    /// Mean training deviance before the first stage and after each stage.
    pub deviance: Vec<f64>,
}

/// Mean binomial deviance `-2/n Σ [y log p + (1-y) log(1-p)]` on the margin scale.
fn mean_deviance(margins: &[f64], y: &[bool]) -> f64 {
    let total: f64 = margins
        .iter()
        .zip(y)
        .map(|(&f, &t)| if t { softplus(-f) } else { softplus(f) })
        .sum();
    2.0 * total / margins.len() as f64
}

const HESSIAN_FLOOR: f64 = 1e-12;

pub fn fit_gradient_boosting(x: &Matrix, y: &[bool], params: &BoostingParams) -> Result<BoostingFit, ModelError> {
    check_training(x, y, 2)?;
    both_classes(y)?;
    let n = x.rows();
    let prevalence = y.iter().filter(|&&v| v).count() as f64 / n as f64;
    let base = logit(prevalence);
    let mut margins = vec![base; n];
    let mut deviance = vec![mean_deviance(&margins, y)];
    let rows: Vec<usize> = (0..n).collect();
    let mut trees = Vec::with_capacity(params.n_estimators);

    for _ in 0..params.n_estimators {
        let probs: Vec<f64> = margins.iter().map(|&f| sigmoid(f)).collect();
        let residuals: Vec<f64> = probs.iter().zip(y).map(|(p, &t)| f64::from(u8::from(t)) - p).collect();
        let tree = TreeBuilder {
            x,
            targets: &residuals,
            criterion: Criterion::Variance,
            max_depth: params.max_depth,
            min_samples_leaf: params.min_samples_leaf,
            candidate_features: |p| (0..p).collect(),
            leaf_value: |leaf: &[usize]| {
                let num: f64 = leaf.iter().map(|&r| residuals[r]).sum();
                let den: f64 = leaf.iter().map(|&r| probs[r] * (1.0 - probs[r])).sum();
                num / den.max(HESSIAN_FLOOR)
            },
        }
        .build(&rows);
        for (r, m) in margins.iter_mut().enumerate() {
            *m += params.learning_rate * tree.predict(x.row(r));
        }
        deviance.push(mean_deviance(&margins, y));
        trees.push(tree);
    }
    let ensemble = TreeEnsemble::boosting(base, params.learning_rate, x.cols(), trees);
    Ok(BoostingFit { ensemble, deviance })
}
