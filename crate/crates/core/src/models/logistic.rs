//! L2-regularised logistic regression fitted with L-BFGS.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use super::{both_classes, check_training, check_width, Classifier, ModelError, Standardizer};
use crate::matrix::Matrix;
use crate::stats::{sigmoid, softplus};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LogisticParams {
    /// Inverse regularisation strength; the penalty weight is `1 / c`.
    pub c: f64,
    pub max_iterations: usize,
    /// Convergence threshold on the gradient max-norm.
    pub tolerance: f64,
}

impl Default for LogisticParams {
    fn default() -> Self {
        Self { c: 1.0, max_iterations: 2000, tolerance: 1e-6 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearModel {
    pub weights: Vec<f64>,
    pub intercept: f64,
    pub l2_strength: f64,
}

impl LinearModel {
    pub fn margin(&self, row: &[f64]) -> f64 {
        self.intercept + self.weights.iter().zip(row).map(|(w, x)| w * x).sum::<f64>()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LogisticFit {
    pub model: LinearModel,
    pub iterations: usize,
    pub converged: bool,
    pub gradient_max_norm: f64,
}

/// Mean negative log-likelihood plus `(λ / 2n)·‖w‖²`, and its gradient.
///
/// `theta` holds the weights followed by the intercept; the intercept is not penalised.
pub fn logistic_objective(x: &Matrix, y: &[bool], l2_strength: f64, theta: &[f64]) -> (f64, Vec<f64>) {
    let n = x.rows() as f64;
    let p = x.cols();
    let (w, b) = (&theta[..p], theta[p]);
    let mut loss = 0.0;
    let mut grad = vec![0.0; p + 1];
    for (row, &label) in x.iter_rows().zip(y) {
        let z = b + w.iter().zip(row).map(|(a, v)| a * v).sum::<f64>();
        let t = f64::from(u8::from(label));
        loss += softplus(z) - t * z;
        let resid = sigmoid(z) - t;
        for (g, v) in grad[..p].iter_mut().zip(row) {
            *g += resid * v;
        }
        grad[p] += resid;
    }
    let penalty: f64 = w.iter().map(|v| v * v).sum::<f64>();
    let value = loss / n + l2_strength / (2.0 * n) * penalty;
    for (g, wj) in grad[..p].iter_mut().zip(w) {
        *g = *g / n + l2_strength / n * wj;
    }
    grad[p] /= n;
    (value, grad)
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn max_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

const MEMORY: usize = 10;

/// Fit on already-standardised features, starting from all zeros.
pub fn fit_logistic(x: &Matrix, y: &[bool], params: &LogisticParams) -> Result<LogisticFit, ModelError> {
    check_training(x, y, 1)?;
    both_classes(y)?;
    let l2 = 1.0 / params.c;
    let dim = x.cols() + 1;
    let mut theta = vec![0.0; dim];
    let (mut f, mut g) = logistic_objective(x, y, l2, &theta);
    let mut history: VecDeque<(Vec<f64>, Vec<f64>, f64)> = VecDeque::with_capacity(MEMORY);
    let mut iterations = 0;

    while max_norm(&g) > params.tolerance && iterations < params.max_iterations {
        iterations += 1;
        // Two-loop recursion for d = -H g.
        let mut q = g.clone();
        let mut alphas = Vec::with_capacity(history.len());
        for (s, yv, rho) in history.iter().rev() {
            let a = rho * dot(s, &q);
            q.iter_mut().zip(yv).for_each(|(qi, yi)| *qi -= a * yi);
            alphas.push(a);
        }
        if let Some((s, yv, _)) = history.back() {
            let gamma = dot(s, yv) / dot(yv, yv);
            q.iter_mut().for_each(|qi| *qi *= gamma);
        } else {
            // First step: unit length along the steepest descent direction.
            let scale = 1.0 / dot(&g, &g).sqrt().max(1.0);
            q.iter_mut().for_each(|qi| *qi *= scale);
        }
        for ((s, yv, rho), a) in history.iter().zip(alphas.iter().rev()) {
            let beta = rho * dot(yv, &q);
            q.iter_mut().zip(s).for_each(|(qi, si)| *qi += (a - beta) * si);
        }
        let mut dir: Vec<f64> = q.iter().map(|v| -v).collect();
        let mut slope = dot(&g, &dir);
        if slope >= 0.0 {
            // Not a descent direction; restart from steepest descent.
            history.clear();
            dir = g.iter().map(|v| -v).collect();
            slope = -dot(&g, &g);
        }

        // Backtracking line search with the Armijo condition.
        let mut step = 1.0;
        let accepted = loop {
            let trial: Vec<f64> = theta.iter().zip(&dir).map(|(t, d)| t + step * d).collect();
            let (ft, gt) = logistic_objective(x, y, l2, &trial);
            if ft <= f + 1e-4 * step * slope {
                break Some((trial, ft, gt));
            }
            step *= 0.5;
            if step < 1e-20 {
                break None;
            }
        };
        let Some((next, fn_, gn)) = accepted else { break };
        let s: Vec<f64> = next.iter().zip(&theta).map(|(a, b)| a - b).collect();
        let yv: Vec<f64> = gn.iter().zip(&g).map(|(a, b)| a - b).collect();
        let sy = dot(&s, &yv);
        if sy > 1e-16 {
            if history.len() == MEMORY {
                history.pop_front();
            }
            history.push_back((s, yv, 1.0 / sy));
        }
        theta = next;
        f = fn_;
        g = gn;
    }

    let gradient_max_norm = max_norm(&g);
    let p = x.cols();
    Ok(LogisticFit {
        model: LinearModel { weights: theta[..p].to_vec(), intercept: theta[p], l2_strength: l2 },
        iterations,
        converged: gradient_max_norm <= params.tolerance,
        gradient_max_norm,
    })
}

/// Standardiser plus linear model, scoring raw feature rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogisticClassifier {
    pub standardizer: Standardizer,
    pub model: LinearModel,
}

impl LogisticClassifier {
    /// Standardise every feature on `x`, then fit.
    pub fn fit(x: &Matrix, y: &[bool], params: &LogisticParams) -> Result<(Self, LogisticFit), ModelError> {
        let standardizer = Standardizer::fit(x)?;
        let z = standardizer.transform(x)?;
        let fit = fit_logistic(&z, y, params)?;
        Ok((Self { standardizer, model: fit.model.clone() }, fit))
    }
}

impl Classifier for LogisticClassifier {
    fn n_features(&self) -> usize {
        self.standardizer.n_features()
    }

    fn predict_proba(&self, rows: &Matrix) -> Result<Vec<f64>, ModelError> {
        check_width(rows, self.n_features())?;
        let z = self.standardizer.transform(rows)?;
        Ok(z.iter_rows().map(|r| sigmoid(self.model.margin(r))).collect())
    }
}
