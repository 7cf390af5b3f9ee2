use serde::{Deserialize, Serialize};

use super::ExplainError;
use crate::matrix::Matrix;
use crate::models::Classifier;
use crate::stats::{mean, quantile_sorted};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PdpMethod {
    /// Every other feature fixed at its training mean.
    MeanAnchored,
    /// Classic partial dependence: mean prediction over all training rows.
    Averaged,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PdpOptions {
    pub grid_size: usize,
    pub lower_quantile: f64,
    pub upper_quantile: f64,
    pub method: PdpMethod,
}

impl Default for PdpOptions {
    fn default() -> Self {
        Self { grid_size: 50, lower_quantile: 0.025, upper_quantile: 0.975, method: PdpMethod::MeanAnchored }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PdpCurve {
    pub feature: usize,
    pub method: PdpMethod,
    pub grid: Vec<f64>,
    pub response: Vec<f64>,
}

impl PdpCurve {
    pub fn to_csv(&self, name: &str) -> String {
        let mut out = format!("{name},probability\n");
        for (g, r) in self.grid.iter().zip(&self.response) {
            out.push_str(&format!("{g:?},{r:?}\n"));
        }
        out
    }
}

fn grid(sorted: &[f64], opts: &PdpOptions) -> Vec<f64> {
    let span = opts.upper_quantile - opts.lower_quantile;
    let mut g: Vec<f64> = (0..opts.grid_size)
        .map(|i| quantile_sorted(sorted, opts.lower_quantile + span * i as f64 / (opts.grid_size - 1) as f64))
        .collect();
    g.dedup();
    g
}

pub fn partial_dependence<M: Classifier + ?Sized>(
    model: &M,
    train: &Matrix,
    feature: usize,
    opts: &PdpOptions,
) -> Result<PdpCurve, ExplainError> {
    if feature >= train.cols() {
        return Err(ExplainError::NoSuchFeature { feature, available: train.cols() });
    }
    if opts.grid_size < 2 {
        return Err(ExplainError::GridTooSmall(opts.grid_size));
    }
    if !(0.0..1.0).contains(&opts.lower_quantile) || !(opts.lower_quantile < opts.upper_quantile && opts.upper_quantile <= 1.0)
    {
        return Err(ExplainError::InvalidQuantiles);
    }
    if train.rows() == 0 {
        return Err(ExplainError::NoRows);
    }
    let mut sorted = train.column(feature);
    sorted.sort_by(f64::total_cmp);
    let mut g = grid(&sorted, opts);
    if g.len() < 2 {
        // The trimmed band collapsed onto one value; fall back to the full range.
        g = grid(&sorted, &PdpOptions { lower_quantile: 0.0, upper_quantile: 1.0, ..*opts });
    }
    if g.len() < 2 {
        return Err(ExplainError::ConstantFeature { feature });
    }

    let response = match opts.method {
        PdpMethod::MeanAnchored => {
            let anchor: Vec<f64> = (0..train.cols()).map(|c| mean(&train.column(c)).unwrap_or(0.0)).collect();
            let mut probe = Matrix::zeros(g.len(), train.cols());
            for (i, &v) in g.iter().enumerate() {
                let row = probe.row_mut(i);
                row.copy_from_slice(&anchor);
                row[feature] = v;
            }
            model.predict_proba(&probe)?
        }
        PdpMethod::Averaged => {
            let mut probe = train.clone();
            let mut out = Vec::with_capacity(g.len());
            for &v in &g {
                for r in 0..probe.rows() {
                    probe.set(r, feature, v);
                }
                let p = model.predict_proba(&probe)?;
                out.push(p.iter().sum::<f64>() / p.len() as f64);
            }
            out
        }
    };
    Ok(PdpCurve { feature, method: opts.method, grid: g, response })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{fit_gradient_boosting, BoostingParams, DecisionTree, ModelError, Node, TreeEnsemble};
    use crate::rng::SplitMix64;

    fn train(n: usize) -> Matrix {
        let rows: Vec<[f64; 2]> = (0..n).map(|i| [i as f64, (i % 7) as f64]).collect();
        Matrix::from_rows(&rows).unwrap()
    }

    #[test]
    fn grid_spans_trimmed_quantiles() {
        let e = TreeEnsemble::boosting(0.3, 1.0, 2, vec![]);
        let c = partial_dependence(&e, &train(401), 0, &PdpOptions::default()).unwrap();
        assert_eq!(c.grid.len(), 50);
        assert_eq!(c.grid[0], 10.0);
        assert_eq!(*c.grid.last().unwrap(), 390.0);
        assert!(c.grid.windows(2).all(|w| w[0] < w[1]));
        let flat = crate::stats::sigmoid(0.3);
        assert!(c.response.iter().all(|&r| r == flat));
    }

    #[test]
    fn stump_gives_a_step_between_bracketing_points() {
        let t = 137.3;
        let stump = DecisionTree::from_nodes(vec![
            Node::Split { feature: 0, threshold: t, left: 1, right: 2, cover: 2 },
            Node::Leaf { value: -2.0, cover: 1 },
            Node::Leaf { value: 2.0, cover: 1 },
        ])
        .unwrap();
        let e = TreeEnsemble::boosting(0.0, 1.0, 2, vec![stump]);
        for method in [PdpMethod::MeanAnchored, PdpMethod::Averaged] {
            let c = partial_dependence(&e, &train(401), 0, &PdpOptions { method, ..Default::default() }).unwrap();
            let jump = c.grid.iter().position(|&g| g > t).unwrap();
            assert!(c.grid[jump - 1] <= t);
            assert!(c.response[..jump].iter().all(|&r| r == c.response[0]));
            assert!(c.response[jump..].iter().all(|&r| r == c.response[jump]));
            assert!(c.response[jump] > c.response[0]);
        }
    }

    #[test]
    fn constant_feature_is_an_error() {
        let x = Matrix::from_rows(&[[1.0, 5.0], [2.0, 5.0], [3.0, 5.0]]).unwrap();
        let e = TreeEnsemble::boosting(0.0, 1.0, 2, vec![]);
        assert_eq!(partial_dependence(&e, &x, 1, &PdpOptions::default()), Err(ExplainError::ConstantFeature { feature: 1 }));
        assert_eq!(
            partial_dependence(&e, &x, 0, &PdpOptions { grid_size: 1, ..Default::default() }),
            Err(ExplainError::GridTooSmall(1))
        );
        assert!(matches!(partial_dependence(&e, &x, 2, &PdpOptions::default()), Err(ExplainError::NoSuchFeature { .. })));
    }

    #[test]
    fn collapsed_band_falls_back_to_full_range() {
        let mut rows = vec![[0.0]; 100];
        rows[99] = [3.0];
        let x = Matrix::from_rows(&rows).unwrap();
        let e = TreeEnsemble::boosting(0.0, 1.0, 1, vec![]);
        let c = partial_dependence(&e, &x, 0, &PdpOptions::default()).unwrap();
        assert_eq!(c.grid.first(), Some(&0.0));
        assert_eq!(c.grid.last(), Some(&3.0));
    }

    #[test]
    fn monotone_dose_response() {
        let mut rng = SplitMix64::new(11);
        let rows: Vec<[f64; 3]> =
            (0..600).map(|_| [(1.5 + 0.5 * rng.standard_normal()).exp(), rng.standard_normal(), rng.standard_normal()]).collect();
        let y: Vec<bool> = rows.iter().map(|r| r[0] > 7.0).collect();
        let x = Matrix::from_rows(&rows).unwrap();
        let e = fit_gradient_boosting(&x, &y, &BoostingParams::default()).unwrap().ensemble;
        let c = partial_dependence(&e, &x, 0, &PdpOptions::default()).unwrap();
        assert!(c.response.windows(2).all(|w| w[1] >= w[0] - 1e-12), "{:?}", c.response);
        assert!(c.response.iter().all(|&r| r > 0.0 && r < 1.0));
        assert!(c.response.last().unwrap() > &0.9 && c.response[0] < 0.1);
    }

    #[test]
    fn model_errors_propagate() {
        let e = TreeEnsemble::boosting(0.0, 1.0, 5, vec![]);
        assert_eq!(
            partial_dependence(&e, &train(10), 0, &PdpOptions::default()),
            Err(ExplainError::Model(ModelError::WidthMismatch { expected: 5, found: 2 }))
        );
    }
}
