use serde::{Deserialize, Serialize};

use super::{check_width, Classifier, DecisionTree, ModelError};
use crate::matrix::Matrix;
use crate::stats::sigmoid;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EnsembleKind {
    GradientBoosting,
    RandomForest,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Aggregation {
    /// `logistic(base + shrinkage * Σ leaf)`.
    SumOfMarginsThenLogistic,
    /// Mean of per-tree leaf probabilities.
    AverageOfLeafProbabilities,
}

impl EnsembleKind {
    pub fn aggregation(self) -> Aggregation {
        match self {
            EnsembleKind::GradientBoosting => Aggregation::SumOfMarginsThenLogistic,
            EnsembleKind::RandomForest => Aggregation::AverageOfLeafProbabilities,
        }
    }
}

/// An additive collection of trees.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreeEnsemble {
    pub kind: EnsembleKind,
    pub aggregation: Aggregation,
    /// Margin-scale offset (boosting); zero for forests.
    pub base_score: f64,
    /// Per-tree multiplier (boosting); 1 for forests.
    pub shrinkage: f64,
    pub n_features: usize,
    #[serde(default)]
    pub feature_names: Vec<String>,
    pub trees: Vec<DecisionTree>,
}

impl TreeEnsemble {
    pub fn boosting(base_score: f64, shrinkage: f64, n_features: usize, trees: Vec<DecisionTree>) -> Self {
        Self {
            kind: EnsembleKind::GradientBoosting,
            aggregation: Aggregation::SumOfMarginsThenLogistic,
            base_score,
            shrinkage,
            n_features,
            feature_names: Vec::new(),
            trees,
        }
    }

    pub fn forest(n_features: usize, trees: Vec<DecisionTree>) -> Self {
        Self {
            kind: EnsembleKind::RandomForest,
            aggregation: Aggregation::AverageOfLeafProbabilities,
            base_score: 0.0,
            shrinkage: 1.0,
            n_features,
            feature_names: Vec::new(),
            trees,
        }
    }

    pub fn with_feature_names(mut self, names: Vec<String>) -> Self {
        self.feature_names = names;
        self
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        let bad = |m: &str| Err(ModelError::MalformedEnsemble(m.to_string()));
        if self.aggregation != self.kind.aggregation() {
            return bad("aggregation does not match ensemble kind");
        }
        match self.kind {
            EnsembleKind::GradientBoosting if !(self.shrinkage > 0.0 && self.shrinkage <= 1.0) => {
                return bad("boosting shrinkage must lie in (0, 1]");
            }
            EnsembleKind::RandomForest if self.shrinkage != 1.0 || self.base_score != 0.0 => {
                return bad("forests use shrinkage 1 and base score 0");
            }
            EnsembleKind::RandomForest if self.trees.is_empty() => return bad("forest has no trees"),
            _ => {}
        }
        if !self.base_score.is_finite() {
            return bad("non-finite base score");
        }
        if !self.feature_names.is_empty() && self.feature_names.len() != self.n_features {
            return bad("feature name count differs from n_features");
        }
        for tree in &self.trees {
            tree.validate()?;
            if tree.max_feature().is_some_and(|f| f >= self.n_features) {
                return bad("tree splits on a feature beyond n_features");
            }
        }
        Ok(())
    }

    /// Weight applied to each tree's output: the shrinkage for boosting, `1 / T` for forests.
    pub fn tree_weight(&self) -> f64 {
        match self.kind {
            EnsembleKind::GradientBoosting => self.shrinkage,
            EnsembleKind::RandomForest => 1.0 / self.trees.len() as f64,
        }
    }

    /// Additive output before any link: the margin for boosting, the
    /// probability for forests.
    pub fn raw_output(&self, row: &[f64]) -> f64 {
        let w = self.tree_weight();
        self.base_score + w * self.trees.iter().map(|t| t.predict(row)).sum::<f64>()
    }

    pub fn predict_margin(&self, rows: &Matrix) -> Result<Vec<f64>, ModelError> {
        if self.kind != EnsembleKind::GradientBoosting {
            return Err(ModelError::MarginUndefined);
        }
        check_width(rows, self.n_features)?;
        Ok(rows.iter_rows().map(|r| self.raw_output(r)).collect())
    }
}

impl Classifier for TreeEnsemble {
    fn n_features(&self) -> usize {
        self.n_features
    }

    fn predict_proba(&self, rows: &Matrix) -> Result<Vec<f64>, ModelError> {
        check_width(rows, self.n_features)?;
        Ok(match self.kind {
            EnsembleKind::GradientBoosting => rows.iter_rows().map(|r| sigmoid(self.raw_output(r))).collect(),
            EnsembleKind::RandomForest => rows.iter_rows().map(|r| self.raw_output(r)).collect(),
        })
    }
}
