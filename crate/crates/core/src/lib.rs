//! Multi-system abnormality prediction from routine laboratory biomarkers.
//!
//! The pipeline runs: [`ingest`] raw lab strings into a clean feature matrix,
//! derive [`indices`] (flags, grades, burden, target), partition with
//! [`split`], fit the [`models`], score them with [`metrics`], and attribute
//! predictions with [`explain`]. [`synth`] generates calibrated synthetic
//! cohorts and [`report`] renders tables and SVG figures.

pub mod explain;
pub mod indices;
pub mod ingest;
pub mod matrix;
pub mod metrics;
pub mod models;
pub mod report;
pub mod rng;
pub mod split;
pub mod stats;
pub mod synth;


pub use indices::{compute_indices, SystemIndices, SystemSet};
pub use ingest::{FeatureMatrix, RawCohort, SchemaConfig};
pub use matrix::Matrix;
pub use models::{DecisionTree, TreeEnsemble};
pub use explain::{ImportanceRanking, PdpCurve, ShapAttribution};

pub use rng::SplitMix64;
pub use split::{FoldPlan, Partition};
