use serde::{Deserialize, Serialize};

use super::ReportError;
use crate::ingest::FeatureMatrix;
use crate::stats::{mean, quantile_sorted};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub variable: String,
    pub mean: f64,
    pub median: f64,
    pub iqr: f64,
    pub min: f64,
    pub max: f64,
}

/// Per-column mean, median, IQR (linear-interpolation quartiles), min and max.
pub fn table_summary(matrix: &FeatureMatrix) -> Result<Vec<SummaryRow>, ReportError> {
    if matrix.rows() == 0 {
        return Err(ReportError::EmptyMatrix);
    }
    Ok(matrix
        .columns()
        .iter()
        .enumerate()
        .map(|(j, c)| {
            let mut v = matrix.values().column(j);
            v.sort_by(f64::total_cmp);
            SummaryRow {
                variable: c.name.clone(),
                mean: mean(&v).unwrap_or(f64::NAN),
                median: quantile_sorted(&v, 0.5),
                iqr: quantile_sorted(&v, 0.75) - quantile_sorted(&v, 0.25),
                min: v[0],
                max: v[v.len() - 1],
            }
        })
        .collect())
}

pub fn summary_csv(rows: &[SummaryRow]) -> String {
    let mut out = String::from("variable,mean,median,iqr,min,max\n");
    for r in rows {
        out.push_str(&format!(
            "{},{:.4},{:.4},{:.4},{:.4},{:.4}\n",
            r.variable, r.mean, r.median, r.iqr, r.min, r.max
        ));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::ColumnSchema;
    use crate::matrix::Matrix;

    fn fm(rows: &[[f64; 2]]) -> FeatureMatrix {
        FeatureMatrix::from_observed(
            vec![ColumnSchema::continuous("a", "u", None, None), ColumnSchema::continuous("b", "u", None, None)],
            Matrix::from_rows(rows).unwrap(),
        )
    }

    #[test]
    fn quartiles_by_hand() {
        let t = table_summary(&fm(&[[1.0, 7.0], [2.0, 7.0], [3.0, 7.0], [4.0, 7.0]])).unwrap();
        // Positions (n-1)q: 0.75 -> 1.75, 2.25 -> 3.25.
        assert_eq!((t[0].mean, t[0].median, t[0].iqr, t[0].min, t[0].max), (2.5, 2.5, 1.5, 1.0, 4.0));
        assert_eq!((t[1].mean, t[1].median, t[1].iqr, t[1].min, t[1].max), (7.0, 7.0, 0.0, 7.0, 7.0));
        let csv = summary_csv(&t);
        assert_eq!(csv.lines().nth(1), Some("a,2.5000,2.5000,1.5000,1.0000,4.0000"));
    }

    #[test]
    fn empty_matrix_rejected() {
        let e = FeatureMatrix::from_observed(vec![ColumnSchema::continuous("a", "u", None, None)], Matrix::zeros(0, 1));
        assert!(matches!(table_summary(&e), Err(ReportError::EmptyMatrix)));
    }
}
