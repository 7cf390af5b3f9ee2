//! Cell-level cleaning and column imputation.

use serde::{Deserialize, Serialize};

use super::parse::ORDINAL_LEVELS;
use super::schema::{apply_plausibility, ColumnKind, ColumnSchema, FillPolicy, SchemaConfig};
use super::{IngestError, RawCohort};
use crate::matrix::Matrix;
use crate::stats;

/// Provenance of a cell before imputation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CellStatus {
    Observed,
    /// Empty or whitespace-only cell, or the column is absent from the input.
    Blank,
    /// Non-empty text with no recognisable value.
    Unparseable,
    /// Parsed, but outside the column's plausibility bounds.
    Implausible,
}

impl CellStatus {
    pub fn is_missing(self) -> bool {
        self != CellStatus::Observed
    }
}

/// Parsed values prior to imputation, stored column-major.
#[derive(Debug, Clone, PartialEq)]
pub struct PreImputation {
    pub columns: Vec<ColumnSchema>,
    pub values: Vec<Vec<Option<f64>>>,
    pub status: Vec<Vec<CellStatus>>,
}

impl PreImputation {
    pub fn rows(&self) -> usize {
        self.values.first().map_or(0, Vec::len)
    }

    /// Parse every schema column of `cohort`. Zero-policy columns absent from
    /// the cohort are treated as entirely blank.
    pub fn from_cohort(cohort: &RawCohort, schema: &SchemaConfig) -> Result<Self, IngestError> {
        schema.validate()?;
        let n = cohort.len();
        let mut values = Vec::with_capacity(schema.columns.len());
        let mut status = Vec::with_capacity(schema.columns.len());
        for column in &schema.columns {
            let Some(idx) = cohort.column_index(&column.name) else {
                if column.fill == FillPolicy::Zero {
                    values.push(vec![None; n]);
                    status.push(vec![CellStatus::Blank; n]);
                    continue;
                }
                return Err(IngestError::MissingColumn(column.name.clone()));
            };
            let mut col_values = Vec::with_capacity(n);
            let mut col_status = Vec::with_capacity(n);
            for row in cohort.rows() {
                let raw = row[idx].as_str();
                let (v, s) = if raw.trim().is_empty() {
                    (None, CellStatus::Blank)
                } else {
                    let parsed = match column.kind {
                        ColumnKind::Continuous => super::parse_quantity(raw),
                        ColumnKind::SemiquantOrdinal => schema.semiquant_tokens.parse(raw),
                    };
                    match parsed {
                        None => (None, CellStatus::Unparseable),
                        Some(v) => match apply_plausibility(v, column) {
                            Some(v) => (Some(v), CellStatus::Observed),
                            None => (None, CellStatus::Implausible),
                        },
                    }
                };
                col_values.push(v);
                col_status.push(s);
            }
            values.push(col_values);
            status.push(col_status);
        }
        Ok(Self { columns: schema.columns.clone(), values, status })
    }
}

/// Cleaned, fully imputed numeric features with per-cell provenance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureMatrix {
    columns: Vec<ColumnSchema>,
    values: Matrix,
    /// Row-major, same shape as `values`.
    status: Vec<CellStatus>,
    imputed_fill: Vec<Option<f64>>,
}

impl FeatureMatrix {
    /// Assemble a matrix whose cells were all observed (no provenance to track).
    pub fn from_observed(columns: Vec<ColumnSchema>, values: Matrix) -> Self {
        assert_eq!(columns.len(), values.cols(), "schema and matrix width differ");
        let status = vec![CellStatus::Observed; values.rows() * values.cols()];
        let imputed_fill = vec![None; columns.len()];
        Self { columns, values, status, imputed_fill }
    }

    pub fn columns(&self) -> &[ColumnSchema] {
        &self.columns
    }

    pub fn names(&self) -> Vec<String> {
        self.columns.iter().map(|c| c.name.clone()).collect()
    }

    pub fn values(&self) -> &Matrix {
        &self.values
    }

    pub fn rows(&self) -> usize {
        self.values.rows()
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c.name == name)
    }

    pub fn status(&self, row: usize, col: usize) -> CellStatus {
        self.status[row * self.columns.len() + col]
    }

    pub fn was_missing(&self, row: usize, col: usize) -> bool {
        self.status(row, col).is_missing()
    }

    /// Fill value used for a column; `None` for matrices built without imputation.
    pub fn imputed_fill(&self, col: usize) -> Option<f64> {
        self.imputed_fill[col]
    }

    pub fn is_zero_filled(&self, col: usize) -> bool {
        self.columns[col].fill == FillPolicy::Zero
    }

    pub fn write_csv<W: std::io::Write>(&self, writer: W) -> Result<(), IngestError> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(self.columns.iter().map(|c| c.name.as_str()))?;
        for row in self.values.iter_rows() {
            w.write_record(row.iter().map(|v| format!("{v}")))?;
        }
        w.flush().map_err(|e| IngestError::Csv(e.into()))?;
        Ok(())
    }
}

/// Fill missing cells column by column.
///
/// Continuous columns take the median of observed values, ordinal columns the
/// mode (ties go to the lowest level). Zero-policy columns become all zeros.
pub fn impute(pre: PreImputation) -> Result<FeatureMatrix, IngestError> {
    let n = pre.rows();
    let p = pre.columns.len();
    let mut values = Matrix::zeros(n, p);
    let mut status = vec![CellStatus::Observed; n * p];
    let mut imputed_fill = Vec::with_capacity(p);

    for (c, column) in pre.columns.iter().enumerate() {
        let observed: Vec<f64> = pre.values[c].iter().flatten().copied().collect();
        let fill = match column.fill {
            FillPolicy::Zero => 0.0,
            FillPolicy::Median => {
                stats::median(&observed).ok_or_else(|| IngestError::AllMissing(column.name.clone()))?
            }
            FillPolicy::Mode => mode_lowest(&observed).ok_or_else(|| IngestError::AllMissing(column.name.clone()))?,
        };
        imputed_fill.push(Some(fill));
        for r in 0..n {
            let v = match (column.fill, pre.values[c][r]) {
                (FillPolicy::Zero, _) => 0.0,
                (_, Some(v)) => v,
                (_, None) => fill,
            };
            values.set(r, c, v);
            status[r * p + c] = pre.status[c][r];
        }
    }
    Ok(FeatureMatrix { columns: pre.columns, values, status, imputed_fill })
}

/// Most frequent ordinal level; ties resolve to the least abnormal level.
fn mode_lowest(observed: &[f64]) -> Option<f64> {
    if observed.is_empty() {
        return None;
    }
    let mut best = (0usize, f64::NAN);
    for level in ORDINAL_LEVELS {
        let count = observed.iter().filter(|&&v| v == level).count();
        if count > best.0 {
            best = (count, level);
        }
    }
    // Only reachable when values lie off the ordinal grid.
    if best.0 == 0 {
        return stats::median(observed);
    }
    Some(best.1)
}

/// Per-column cleaning counts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColumnAudit {
    pub name: String,
    pub parsed: usize,
    pub blank: usize,
    pub unparseable: usize,
    pub excluded: usize,
    pub imputed: usize,
    pub fill_value: Option<f64>,
    pub zero_filled: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CleaningAudit {
    pub rows: usize,
    pub columns: Vec<ColumnAudit>,
}

impl CleaningAudit {
    pub fn from_matrix(m: &FeatureMatrix) -> Self {
        let columns = m
            .columns
            .iter()
            .enumerate()
            .map(|(c, col)| {
                let count = |s: CellStatus| (0..m.rows()).filter(|&r| m.status(r, c) == s).count();
                let parsed = count(CellStatus::Observed);
                let zero_filled = m.is_zero_filled(c);
                ColumnAudit {
                    name: col.name.clone(),
                    parsed,
                    blank: count(CellStatus::Blank),
                    unparseable: count(CellStatus::Unparseable),
                    excluded: count(CellStatus::Implausible),
                    imputed: if zero_filled { m.rows() } else { m.rows() - parsed },
                    fill_value: m.imputed_fill[c],
                    zero_filled,
                }
            })
            .collect();
        Self { rows: m.rows(), columns }
    }
}

/// Parse, filter and impute a raw cohort in one pass.
pub fn clean(cohort: &RawCohort, schema: &SchemaConfig) -> Result<(FeatureMatrix, CleaningAudit), IngestError> {
    let matrix = impute(PreImputation::from_cohort(cohort, schema)?)?;
    let audit = CleaningAudit::from_matrix(&matrix);
    Ok((matrix, audit))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::SemiquantTokens;
    use proptest::prelude::*;

    fn pre_single(column: ColumnSchema, cells: Vec<Option<f64>>) -> PreImputation {
        let status = cells.iter().map(|c| if c.is_some() { CellStatus::Observed } else { CellStatus::Blank }).collect();
        PreImputation { columns: vec![column], values: vec![cells], status: vec![status] }
    }

    fn cont(name: &str) -> ColumnSchema {
        ColumnSchema::continuous(name, "", None, None)
    }

    #[test]
    fn odd_median_fill() {
        let m = impute(pre_single(cont("x"), vec![Some(1.0), None, Some(2.0), Some(4.0)])).unwrap();
        assert_eq!(m.values().get(1, 0), 2.0);
        assert_eq!(m.imputed_fill(0), Some(2.0));
        assert!(m.was_missing(1, 0));
        assert!(!m.was_missing(0, 0));
    }

    #[test]
    fn even_median_fill_averages_middle_pair() {
        let m = impute(pre_single(cont("x"), vec![Some(1.0), Some(2.0), Some(3.0), Some(10.0), None])).unwrap();
        assert_eq!(m.values().get(4, 0), 2.5);
    }

    #[test]
    fn zero_policy_overrides_content() {
        let m = impute(pre_single(ColumnSchema::zero_filled("BUN", "mmol/L"), vec![Some(9.0), None, None])).unwrap();
        assert_eq!(m.values().column(0), vec![0.0, 0.0, 0.0]);
        assert!(m.is_zero_filled(0));
        let audit = CleaningAudit::from_matrix(&m);
        assert_eq!(audit.columns[0].imputed, 3);
        assert!(audit.columns[0].zero_filled);
    }

    #[test]
    fn all_missing_non_zero_column_fails() {
        let err = impute(pre_single(cont("Cr"), vec![None, None])).unwrap_err();
        assert!(matches!(err, IngestError::AllMissing(ref c) if c == "Cr"));
    }

    #[test]
    fn mode_ties_go_to_lowest_level() {
        let col = ColumnSchema::ordinal("PRO");
        let m = impute(pre_single(col.clone(), vec![Some(2.0), Some(1.0), None, Some(1.0), Some(2.0)])).unwrap();
        assert_eq!(m.values().get(2, 0), 1.0);
        let m = impute(pre_single(col, vec![Some(3.0), Some(3.0), Some(0.5), None])).unwrap();
        assert_eq!(m.values().get(3, 0), 3.0);
    }

    #[test]
    fn provenance_distinguishes_blank_unparseable_and_implausible() {
        let schema = SchemaConfig {
            columns: vec![
                ColumnSchema::continuous("Cr", "μmol/L", Some(10.0), Some(2000.0)),
                ColumnSchema::ordinal("PRO"),
            ],
            semiquant_tokens: SemiquantTokens::default(),
        };
        let rows = vec![
            vec!["77 μmol/L".to_string(), "2+".to_string()],
            vec!["".to_string(), "??".to_string()],
            vec!["n/a".to_string(), "neg".to_string()],
            vec!["5000 μmol/L".to_string(), "".to_string()],
        ];
        let cohort = RawCohort::new(vec!["Cr".into(), "PRO".into()], rows).unwrap();
        let (m, audit) = clean(&cohort, &schema).unwrap();
        assert_eq!(m.status(1, 0), CellStatus::Blank);
        assert_eq!(m.status(2, 0), CellStatus::Unparseable);
        assert_eq!(m.status(3, 0), CellStatus::Implausible);
        assert_eq!(m.status(1, 1), CellStatus::Unparseable);
        assert_eq!(m.values().column(0), vec![77.0; 4]);
        // Mode of {2, 0} ties, lowest wins.
        assert_eq!(m.values().get(1, 1), 0.0);
        let cr = &audit.columns[0];
        assert_eq!((cr.parsed, cr.blank, cr.unparseable, cr.excluded, cr.imputed), (1, 1, 1, 1, 3));
        assert_eq!(cr.fill_value, Some(77.0));
    }

    #[test]
    fn absent_zero_column_is_synthesised() {
        let schema = SchemaConfig {
            columns: vec![cont("Cr"), ColumnSchema::zero_filled("BUN", "mmol/L")],
            semiquant_tokens: SemiquantTokens::default(),
        };
        let cohort = RawCohort::new(vec!["Cr".into()], vec![vec!["60".into()]]).unwrap();
        let (m, _) = clean(&cohort, &schema).unwrap();
        assert_eq!(m.values().row(0), &[60.0, 0.0]);

        let schema = SchemaConfig { columns: vec![cont("Cr"), cont("UA")], semiquant_tokens: SemiquantTokens::default() };
        assert!(matches!(clean(&cohort, &schema), Err(IngestError::MissingColumn(_))));
    }

    fn brute_median(mut v: Vec<f64>) -> f64 {
        // Selection by repeated minimum removal.
        let mut ordered = Vec::new();
        while !v.is_empty() {
            let (i, _) = v.iter().enumerate().fold((0, f64::INFINITY), |acc, (i, &x)| if x < acc.1 { (i, x) } else { acc });
            ordered.push(v.remove(i));
        }
        let n = ordered.len();
        if n % 2 == 1 { ordered[n / 2] } else { (ordered[n / 2 - 1] + ordered[n / 2]) / 2.0 }
    }

    proptest! {
        #[test]
        fn imputation_preserves_observed_and_fills_with_median(
            cells in proptest::collection::vec(proptest::option::weighted(0.7, -1.0e3f64..1.0e3), 1..60)
        ) {
            prop_assume!(cells.iter().any(Option::is_some));
            let observed: Vec<f64> = cells.iter().flatten().copied().collect();
            let m = impute(pre_single(cont("x"), cells.clone())).unwrap();
            let expected_fill = brute_median(observed);
            for (r, cell) in cells.iter().enumerate() {
                let v = m.values().get(r, 0);
                prop_assert!(v.is_finite());
                match cell {
                    Some(x) => prop_assert_eq!(v, *x),
                    None => prop_assert_eq!(v, expected_fill),
                }
            }
        }

        #[test]
        fn ordinal_fill_is_a_level(
            cells in proptest::collection::vec(proptest::option::weighted(0.5, proptest::sample::select(ORDINAL_LEVELS.to_vec())), 1..60)
        ) {
            prop_assume!(cells.iter().any(Option::is_some));
            let m = impute(pre_single(ColumnSchema::ordinal("PRO"), cells)).unwrap();
            prop_assert!(ORDINAL_LEVELS.contains(&m.imputed_fill(0).unwrap()));
            for v in m.values().column(0) {
                prop_assert!(ORDINAL_LEVELS.contains(&v));
            }
        }
    }
}
