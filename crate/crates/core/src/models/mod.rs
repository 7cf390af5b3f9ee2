//! Classifiers: L2-regularised logistic regression, random forest and
//! gradient-boosted trees, all trained from scratch.

mod boosting;
mod ensemble;
mod forest;
mod logistic;
mod standardize;
mod tree;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::matrix::Matrix;

pub use boosting::{fit_gradient_boosting, BoostingFit, BoostingParams};
pub use ensemble::{Aggregation, EnsembleKind, TreeEnsemble};
pub use forest::{fit_random_forest, fit_random_forest_with_plan, ForestParams, ForestPlan};
pub use logistic::{fit_logistic, logistic_objective, LinearModel, LogisticClassifier, LogisticFit, LogisticParams};
pub use standardize::Standardizer;
pub use tree::{DecisionTree, Node};

#[derive(Debug, Error, PartialEq)]
pub enum ModelError {
    #[error("training labels contain a single class")]
    SingleClass,
    #[error("need at least {required} training rows, got {found}")]
    TooFewRows { required: usize, found: usize },
    #[error("expected {expected} features per row, got {found}")]
    WidthMismatch { expected: usize, found: usize },
    #[error("{rows} rows of features but {labels} labels")]
    LabelCount { rows: usize, labels: usize },
    #[error("margin is only defined for gradient-boosted ensembles")]
    MarginUndefined,
    #[error("malformed tree: {0}")]
    MalformedTree(String),
    #[error("malformed ensemble: {0}")]
    MalformedEnsemble(String),
    #[error("non-finite feature value at row {row}, column {col}")]
    NonFinite { row: usize, col: usize },
}

/// Anything that scores rows with a positive-class probability.
pub trait Classifier {
    fn n_features(&self) -> usize;

    fn predict_proba(&self, rows: &Matrix) -> Result<Vec<f64>, ModelError>;
}

pub fn check_width(rows: &Matrix, expected: usize) -> Result<(), ModelError> {
    if rows.cols() != expected {
        return Err(ModelError::WidthMismatch { expected, found: rows.cols() });
    }
    Ok(())
}

pub(crate) fn check_training(x: &Matrix, y: &[bool], min_rows: usize) -> Result<(), ModelError> {
    if x.rows() != y.len() {
        return Err(ModelError::LabelCount { rows: x.rows(), labels: y.len() });
    }
    if x.rows() < min_rows {
        return Err(ModelError::TooFewRows { required: min_rows, found: x.rows() });
    }
    for r in 0..x.rows() {
        if let Some(c) = x.row(r).iter().position(|v| !v.is_finite()) {
            return Err(ModelError::NonFinite { row: r, col: c });
        }
    }
    Ok(())
}

pub(crate) fn both_classes(y: &[bool]) -> Result<(), ModelError> {
    if y.iter().all(|&v| v) || y.iter().all(|&v| !v) {
        return Err(ModelError::SingleClass);
    }
    Ok(())
}

/// Serialized form of any trained classifier.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum TrainedModel {
    Logistic(LogisticClassifier),
    Ensemble(TreeEnsemble),
}

impl TrainedModel {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("models serialize")
    }

    pub fn from_json(text: &str) -> Result<Self, ModelError> {
        let model: TrainedModel =
            serde_json::from_str(text).map_err(|e| ModelError::MalformedEnsemble(e.to_string()))?;
        if let TrainedModel::Ensemble(e) = &model {
            e.validate()?;
        }
        Ok(model)
    }
}

impl Classifier for TrainedModel {
    fn n_features(&self) -> usize {
        match self {
            TrainedModel::Logistic(m) => m.n_features(),
            TrainedModel::Ensemble(m) => m.n_features(),
        }
    }

    fn predict_proba(&self, rows: &Matrix) -> Result<Vec<f64>, ModelError> {
        match self {
            TrainedModel::Logistic(m) => m.predict_proba(rows),
            TrainedModel::Ensemble(m) => m.predict_proba(rows),
        }
    }
}
