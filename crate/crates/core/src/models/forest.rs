//! Bootstrap-aggregated Gini trees.

use serde::{Deserialize, Serialize};

use super::tree::{Criterion, TreeBuilder};
use super::{check_training, ModelError, TreeEnsemble};
use crate::matrix::Matrix;
use crate::rng::SplitMix64;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ForestParams {
    pub n_trees: usize,
    pub max_depth: usize,
    pub min_samples_leaf: usize,
    /// Features tried per node; `None` means `max(1, floor(√p))`.
    #[serde(default)]
    pub max_features: Option<usize>,
}

impl Default for ForestParams {
    fn default() -> Self {
        Self { n_trees: 200, max_depth: 8, min_samples_leaf: 10, max_features: None }
    }
}

/// Every random choice a forest fit makes: per-tree bootstrap draws (row
/// indices) and the seed for per-node feature sampling.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ForestPlan {
    pub draws: Vec<Vec<usize>>,
    pub feature_seeds: Vec<u64>,
}

impl ForestPlan {
    pub fn new(seed: u64, n_rows: usize, n_trees: usize) -> Self {
        let mut master = SplitMix64::new(seed);
        let mut draws = Vec::with_capacity(n_trees);
        let mut feature_seeds = Vec::with_capacity(n_trees);
        for _ in 0..n_trees {
            let mut tree_rng = master.fork();
            draws.push((0..n_rows).map(|_| tree_rng.index(n_rows)).collect());
            feature_seeds.push(tree_rng.next_u64());
        }
        Self { draws, feature_seeds }
    }
}

pub fn fit_random_forest(x: &Matrix, y: &[bool], params: &ForestParams, seed: u64) -> Result<TreeEnsemble, ModelError> {
    let plan = ForestPlan::new(seed, x.rows(), params.n_trees);
    fit_random_forest_with_plan(x, y, params, &plan)
}

/// Fit using pre-drawn randomness. Leaves hold the positive fraction of the
/// bootstrap rows that reach them.
pub fn fit_random_forest_with_plan(
    x: &Matrix,
    y: &[bool],
    params: &ForestParams,
    plan: &ForestPlan,
) -> Result<TreeEnsemble, ModelError> {
    check_training(x, y, 2)?;
    let p = x.cols();
    let mtry = params.max_features.unwrap_or_else(|| ((p as f64).sqrt().floor() as usize).max(1)).clamp(1, p.max(1));
    let targets: Vec<f64> = y.iter().map(|&v| f64::from(u8::from(v))).collect();
    let trees = plan
        .draws
        .iter()
        .zip(&plan.feature_seeds)
        .map(|(draw, &fseed)| {
            let mut rng = SplitMix64::new(fseed);
            TreeBuilder {
                x,
                targets: &targets,
                criterion: Criterion::Gini,
                max_depth: params.max_depth,
                min_samples_leaf: params.min_samples_leaf,
                candidate_features: |p| rng.sample_without_replacement(p, mtry),
                leaf_value: |rows: &[usize]| rows.iter().map(|&r| targets[r]).sum::<f64>() / rows.len() as f64,
            }
            .build(draw)
        })
        .collect();
    Ok(TreeEnsemble::forest(p, trees))
}
