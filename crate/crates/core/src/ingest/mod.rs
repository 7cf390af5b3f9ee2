//! Laboratory record ingestion: CSV loading, value parsing, plausibility
//! filtering and imputation.

mod clean;
mod parse;
mod schema;

use std::collections::HashSet;
use std::io::Read;
use std::path::{Path, PathBuf};

use thiserror::Error;

pub use clean::{clean, impute, CellStatus, CleaningAudit, ColumnAudit, FeatureMatrix, PreImputation};
pub use parse::{parse_quantity, parse_semiquant, SemiquantTokens, ORDINAL_LEVELS};
pub use schema::{apply_plausibility, ColumnKind, ColumnSchema, FillPolicy, SchemaConfig};

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("cannot read {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("malformed CSV: {0}")]
    Csv(#[from] csv::Error),
    #[error("invalid schema config: {0}")]
    SchemaParse(serde_json::Error),
    #[error("invalid schema for column {column}: {reason}")]
    InvalidSchema { column: String, reason: String },
    #[error("schema column {column} expects header {header:?}, which the file does not contain")]
    MissingHeader { column: String, header: String },
    #[error("duplicate column name {0:?}")]
    DuplicateColumn(String),
    #[error("row {row} has {found} cells, expected {expected}")]
    RaggedRow { row: usize, found: usize, expected: usize },
    #[error("column {0} has no observed values to impute from")]
    AllMissing(String),
    #[error("column {0} is required by the schema but absent from the cohort")]
    MissingColumn(String),
}

/// String-valued laboratory table, one record per patient.
#[derive(Debug, Clone, PartialEq)]
pub struct RawCohort {
    columns: Vec<String>,
    rows: Vec<Vec<String>>,
}

impl RawCohort {
    pub fn new(columns: Vec<String>, rows: Vec<Vec<String>>) -> Result<Self, IngestError> {
        let mut seen = HashSet::new();
        for c in &columns {
            if !seen.insert(c.as_str()) {
                return Err(IngestError::DuplicateColumn(c.clone()));
            }
        }
        for (i, r) in rows.iter().enumerate() {
            if r.len() != columns.len() {
                return Err(IngestError::RaggedRow { row: i, found: r.len(), expected: columns.len() });
            }
        }
        Ok(Self { columns, rows })
    }

    pub fn columns(&self) -> &[String] {
        &self.columns
    }

    pub fn rows(&self) -> &[Vec<String>] {
        &self.rows
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c == name)
    }

    pub fn cell(&self, row: usize, column: &str) -> Option<&str> {
        let c = self.column_index(column)?;
        self.rows.get(row).map(|r| r[c].as_str())
    }

    pub fn write_csv<W: std::io::Write>(&self, writer: W) -> Result<(), IngestError> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(&self.columns)?;
        for r in &self.rows {
            w.write_record(r)?;
        }
        w.flush().map_err(|e| IngestError::Csv(e.into()))?;
        Ok(())
    }
}

/// A cohort read from disk, with the headers the schema did not claim.
#[derive(Debug, Clone)]
pub struct LoadedCohort {
    pub cohort: RawCohort,
    pub dropped_columns: Vec<String>,
}

/// Read a CSV export and rename its headers to canonical analyte names.
pub fn load_cohort(path: &Path, schema: &SchemaConfig) -> Result<LoadedCohort, IngestError> {
    let file = std::fs::File::open(path)
        .map_err(|source| IngestError::Io { path: path.to_path_buf(), source })?;
    read_cohort(file, schema)
}

pub fn read_cohort<R: Read>(reader: R, schema: &SchemaConfig) -> Result<LoadedCohort, IngestError> {
    schema.validate()?;
    let mut r = csv::ReaderBuilder::new().has_headers(true).flexible(false).from_reader(reader);
    let headers: Vec<String> = r.headers()?.iter().map(|h| h.trim().to_string()).collect();

    let mut picks = Vec::with_capacity(schema.columns.len());
    for column in &schema.columns {
        let header = column.source_header();
        let idx = headers.iter().position(|h| h == header).ok_or_else(|| IngestError::MissingHeader {
            column: column.name.clone(),
            header: header.to_string(),
        })?;
        picks.push(idx);
    }
    let claimed: HashSet<usize> = picks.iter().copied().collect();
    let dropped_columns: Vec<String> = headers
        .iter()
        .enumerate()
        .filter(|(i, _)| !claimed.contains(i))
        .map(|(_, h)| h.clone())
        .collect();
    if !dropped_columns.is_empty() {
        log::warn!("dropping {} unmapped column(s): {:?}", dropped_columns.len(), dropped_columns);
    }

    let mut rows = Vec::new();
    for record in r.records() {
        let record = record?;
        rows.push(picks.iter().map(|&i| record.get(i).unwrap_or("").to_string()).collect());
    }
    let cohort = RawCohort::new(schema.names(), rows)?;
    Ok(LoadedCohort { cohort, dropped_columns })
}
