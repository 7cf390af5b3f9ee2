//! Exact path-dependent TreeSHAP, global importance, beeswarm export and
//! partial dependence.

mod importance;
mod pdp;
mod shap;

use thiserror::Error;

use crate::models::ModelError;

pub use importance::{beeswarm_csv, beeswarm_export, global_importance, BeeswarmRecord, ImportanceEntry, ImportanceRanking};
pub use pdp::{partial_dependence, PdpCurve, PdpMethod, PdpOptions};
pub use shap::{tree_shap, tree_shap_row, tree_shap_single, ShapAttribution};

#[derive(Debug, Error, PartialEq)]
pub enum ExplainError {
    #[error("tree {tree} node {node} has zero cover")]
    ZeroCover { tree: usize, node: usize },
    #[error("{0}")]
    Model(#[from] ModelError),
    #[error("no rows to summarise")]
    NoRows,
    #[error("shape mismatch: attributions are {attr_rows}x{attr_cols}, values are {value_rows}x{value_cols}")]
    ShapeMismatch { attr_rows: usize, attr_cols: usize, value_rows: usize, value_cols: usize },
    #[error("{names} feature names for {features} features")]
    NameCount { names: usize, features: usize },
    #[error("feature {feature} does not exist ({available} columns)")]
    NoSuchFeature { feature: usize, available: usize },
    #[error("feature {feature} is constant in the training matrix; no grid can be built")]
    ConstantFeature { feature: usize },
    #[error("grid size must be at least 2, got {0}")]
    GridTooSmall(usize),
    #[error("grid quantiles must satisfy 0 <= lower < upper <= 1")]
    InvalidQuantiles,
}
