//! Column schemas and the schema configuration file.

use std::collections::HashSet;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::parse::SemiquantTokens;
use super::IngestError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ColumnKind {
    Continuous,
    SemiquantOrdinal,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FillPolicy {
    Median,
    Mode,
    /// Every cell is set to zero regardless of content.
    Zero,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColumnSchema {
    /// Canonical analyte name used throughout the pipeline.
    pub name: String,
    /// Header in the input file. Defaults to `name`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub source: Option<String>,
    pub kind: ColumnKind,
    /// Documentation only.
    #[serde(default)]
    pub unit: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lower: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub upper: Option<f64>,
    pub fill: FillPolicy,
}

impl ColumnSchema {
    pub fn continuous(name: &str, unit: &str, lower: Option<f64>, upper: Option<f64>) -> Self {
        Self {
            name: name.to_string(),
            source: None,
            kind: ColumnKind::Continuous,
            unit: unit.to_string(),
            lower,
            upper,
            fill: FillPolicy::Median,
        }
    }

    pub fn ordinal(name: &str) -> Self {
        Self {
            name: name.to_string(),
            source: None,
            kind: ColumnKind::SemiquantOrdinal,
            unit: String::new(),
            lower: None,
            upper: None,
            fill: FillPolicy::Mode,
        }
    }

    pub fn zero_filled(name: &str, unit: &str) -> Self {
        Self { fill: FillPolicy::Zero, ..Self::continuous(name, unit, None, None) }
    }

    pub fn source_header(&self) -> &str {
        self.source.as_deref().unwrap_or(&self.name)
    }

    pub fn validate(&self) -> Result<(), IngestError> {
        let bad = |reason: String| IngestError::InvalidSchema { column: self.name.clone(), reason };
        for bound in [self.lower, self.upper].into_iter().flatten() {
            if !bound.is_finite() {
                return Err(bad("plausibility bounds must be finite".into()));
            }
        }
        if let (Some(lo), Some(hi)) = (self.lower, self.upper) {
            if lo >= hi {
                return Err(bad(format!("lower bound {lo} is not below upper bound {hi}")));
            }
        }
        match (self.kind, self.fill) {
            (_, FillPolicy::Zero)
            | (ColumnKind::Continuous, FillPolicy::Median)
            | (ColumnKind::SemiquantOrdinal, FillPolicy::Mode) => Ok(()),
            (kind, fill) => Err(bad(format!("fill policy {fill:?} is not valid for {kind:?} columns"))),
        }
    }
}

/// Value within the inclusive plausibility range, or `None`. Absent bounds are unbounded.
pub fn apply_plausibility(value: f64, schema: &ColumnSchema) -> Option<f64> {
    let above_lower = schema.lower.is_none_or(|lo| value >= lo);
    let below_upper = schema.upper.is_none_or(|hi| value <= hi);
    (above_lower && below_upper).then_some(value)
}

/// The schema configuration file: column definitions plus dipstick vocabulary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SchemaConfig {
    pub columns: Vec<ColumnSchema>,
    #[serde(default)]
    pub semiquant_tokens: SemiquantTokens,
}

impl SchemaConfig {
    pub fn from_json_str(text: &str) -> Result<Self, IngestError> {
        let config: SchemaConfig = serde_json::from_str(text).map_err(IngestError::SchemaParse)?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self, IngestError> {
        let text = std::fs::read_to_string(path)
            .map_err(|source| IngestError::Io { path: path.to_path_buf(), source })?;
        Self::from_json_str(&text)
    }

    pub fn validate(&self) -> Result<(), IngestError> {
        let mut names = HashSet::new();
        let mut sources = HashSet::new();
        for column in &self.columns {
            column.validate()?;
            if !names.insert(column.name.as_str()) {
                return Err(IngestError::InvalidSchema {
                    column: column.name.clone(),
                    reason: "duplicate canonical name".into(),
                });
            }
            if !sources.insert(column.source_header()) {
                return Err(IngestError::InvalidSchema {
                    column: column.name.clone(),
                    reason: format!("source header {:?} mapped twice", column.source_header()),
                });
            }
        }
        Ok(())
    }

    pub fn column(&self, name: &str) -> Option<&ColumnSchema> {
        self.columns.iter().find(|c| c.name == name)
    }

    pub fn names(&self) -> Vec<String> {
        self.columns.iter().map(|c| c.name.clone()).collect()
    }
}

impl Default for SchemaConfig {
    /// Twenty-five analytes: twenty serum/blood values and five dipstick results.
    ///
    /// Bounds are wide enough to retain every extreme seen in the reference
    /// cohort (e.g. creatinine up to 1816 μmol/L, glucose down to 1.0 mmol/L).
    fn default() -> Self {
        let c = ColumnSchema::continuous;
        let columns = vec![
            c("Cr", "μmol/L", Some(10.0), Some(2000.0)),
            c("UA", "μmol/L", Some(30.0), Some(1500.0)),
            c("ALB", "g/L", Some(5.0), Some(70.0)),
            c("HDL-c", "mmol/L", Some(0.1), Some(6.0)),
            c("LDL-c", "mmol/L", Some(0.05), Some(20.0)),
            c("TG", "mmol/L", Some(0.05), Some(50.0)),
            c("TC", "mmol/L", Some(0.5), Some(30.0)),
            c("GLU", "mmol/L", Some(0.5), Some(60.0)),
            c("WBC", "×10⁹/L", Some(0.1), Some(200.0)),
            c("Hb", "g/L", Some(20.0), Some(250.0)),
            c("PLT", "×10⁹/L", Some(5.0), Some(2000.0)),
            c("HCT", "L/L", Some(0.05), Some(0.8)),
            c("MCV", "fL", Some(40.0), Some(150.0)),
            c("MCH", "pg", Some(10.0), Some(60.0)),
            c("MPV", "fL", Some(3.0), Some(20.0)),
            c("γ-GT", "U/L", Some(1.0), Some(2000.0)),
            c("RBC", "×10¹²/L", Some(0.5), Some(10.0)),
            ColumnSchema::zero_filled("BUN", "mmol/L"),
            ColumnSchema::zero_filled("AST", "U/L"),
            ColumnSchema::zero_filled("ALT", "U/L"),
            ColumnSchema::ordinal("PRO"),
            ColumnSchema::ordinal("LEU"),
            ColumnSchema::ordinal("NIT"),
            ColumnSchema::ordinal("KET"),
            ColumnSchema::ordinal("ERY"),
        ];
        Self { columns, semiquant_tokens: SemiquantTokens::default() }
    }
}
