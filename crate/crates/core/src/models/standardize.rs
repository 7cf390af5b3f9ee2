use serde::{Deserialize, Serialize};

use super::ModelError;
use crate::matrix::Matrix;

/// Per-feature centring and scaling fitted on training rows.
///
/// Uses the population standard deviation. Constant features get divisor 1
/// and are reported by [`Standardizer::is_constant`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub means: Vec<f64>,
    pub scales: Vec<f64>,
    pub constant: Vec<bool>,
}

impl Standardizer {
    pub fn fit(rows: &Matrix) -> Result<Self, ModelError> {
        if rows.is_empty() {
            return Err(ModelError::TooFewRows { required: 1, found: 0 });
        }
        let n = rows.rows() as f64;
        let p = rows.cols();
        let mut means = vec![0.0; p];
        for r in rows.iter_rows() {
            for (m, v) in means.iter_mut().zip(r) {
                *m += v;
            }
        }
        means.iter_mut().for_each(|m| *m /= n);
        let mut vars = vec![0.0; p];
        for r in rows.iter_rows() {
            for j in 0..p {
                vars[j] += (r[j] - means[j]).powi(2);
            }
        }
        let mut scales = Vec::with_capacity(p);
        let mut constant = Vec::with_capacity(p);
        for (j, v) in vars.iter().enumerate() {
            let sd = (v / n).sqrt();
            // Relative test so a column like {0.1, 0.1, 0.1} with rounding noise counts as constant.
            let is_const = sd <= 1e-12 * means[j].abs().max(1.0);
            constant.push(is_const);
            scales.push(if is_const { 1.0 } else { sd });
        }
        Ok(Self { means, scales, constant })
    }

    pub fn n_features(&self) -> usize {
        self.means.len()
    }

    pub fn is_constant(&self, feature: usize) -> bool {
        self.constant[feature]
    }

    pub fn transform(&self, rows: &Matrix) -> Result<Matrix, ModelError> {
        super::check_width(rows, self.n_features())?;
        let mut out = rows.clone();
        for r in 0..out.rows() {
            for (j, v) in out.row_mut(r).iter_mut().enumerate() {
                *v = (*v - self.means[j]) / self.scales[j];
            }
        }
        Ok(out)
    }

    /// Inverse of [`transform`](Self::transform).
    pub fn inverse_transform(&self, rows: &Matrix) -> Result<Matrix, ModelError> {
        super::check_width(rows, self.n_features())?;
        let mut out = rows.clone();
        for r in 0..out.rows() {
            for (j, v) in out.row_mut(r).iter_mut().enumerate() {
                *v = *v * self.scales[j] + self.means[j];
            }
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn population_scaling() {
        let m = Matrix::from_rows(&[[1.0, 5.0], [2.0, 5.0], [3.0, 5.0]]).unwrap();
        let s = Standardizer::fit(&m).unwrap();
        assert_eq!(s.means, vec![2.0, 5.0]);
        assert!((s.scales[0] - (2.0f64 / 3.0).sqrt()).abs() < 1e-15);
        assert!(s.is_constant(1) && !s.is_constant(0));
        let t = s.transform(&m).unwrap();
        let expected = 1.0 / (2.0f64 / 3.0).sqrt();
        assert!((t.get(0, 0) + expected).abs() < 1e-12);
        assert_eq!(t.get(1, 0), 0.0);
        assert!((t.get(2, 0) - 1.224744871391589).abs() < 1e-12);
        assert_eq!(t.column(1), vec![0.0; 3]);

        let back = s.inverse_transform(&t).unwrap();
        for (a, b) in back.as_slice().iter().zip(m.as_slice()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn training_moments_after_transform() {
        let rows: Vec<[f64; 2]> = (0..50).map(|i| [i as f64 * 0.37 + 3.0, ((i * 7) % 11) as f64]).collect();
        let m = Matrix::from_rows(&rows).unwrap();
        let t = Standardizer::fit(&m).unwrap().transform(&m).unwrap();
        for j in 0..2 {
            let col = t.column(j);
            let mean = col.iter().sum::<f64>() / 50.0;
            let var = col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / 50.0;
            assert!(mean.abs() <= 1e-10);
            assert!((var - 1.0).abs() <= 1e-10);
        }
    }

    #[test]
    fn uses_training_statistics_only() {
        let train = Matrix::from_rows(&[[0.0], [2.0]]).unwrap();
        let s = Standardizer::fit(&train).unwrap();
        let other = Matrix::from_rows(&[[4.0]]).unwrap();
        assert_eq!(s.transform(&other).unwrap().get(0, 0), 3.0);
        assert!(s.transform(&Matrix::zeros(1, 2)).is_err());
        assert!(Standardizer::fit(&Matrix::zeros(0, 2)).is_err());
    }
}
