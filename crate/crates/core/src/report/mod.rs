//! Deterministic SVG figures and CSV summary tables.

mod figures;
mod svg;
mod table;

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::explain::{BeeswarmRecord, ImportanceEntry, PdpCurve};
use crate::metrics::RocCurve;
use crate::stats::pearson;

pub use figures::{
    burden_distribution, correlation_heatmap, histogram_counts, histogram_grid, importance_bar, pdp_panel, roc_plot,
    shap_beeswarm, HISTOGRAM_BINS,
};
pub use table::{summary_csv, table_summary, SummaryRow};

#[derive(Debug, Error)]
pub enum ReportError {
    #[error("data reference {0} does not exist")]
    UnresolvedData(PathBuf),
    #[error("malformed artifact {path}: {reason}")]
    Malformed { path: PathBuf, reason: String },
    #[error("cannot summarise an empty matrix")]
    EmptyMatrix,
    #[error("writing {path}: {source}")]
    Write {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FigureKind {
    HistogramGrid,
    BurdenDistribution,
    CorrelationHeatmap,
    Roc,
    ShapBeeswarm,
    ImportanceBar,
    PdpPanel,
}

impl FigureKind {
    pub const ALL: [FigureKind; 7] = [
        FigureKind::HistogramGrid,
        FigureKind::BurdenDistribution,
        FigureKind::CorrelationHeatmap,
        FigureKind::Roc,
        FigureKind::ShapBeeswarm,
        FigureKind::ImportanceBar,
        FigureKind::PdpPanel,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            FigureKind::HistogramGrid => "histogram-grid",
            FigureKind::BurdenDistribution => "burden-distribution",
            FigureKind::CorrelationHeatmap => "correlation-heatmap",
            FigureKind::Roc => "roc",
            FigureKind::ShapBeeswarm => "shap-beeswarm",
            FigureKind::ImportanceBar => "importance-bar",
            FigureKind::PdpPanel => "pdp-panel",
        }
    }
}

/// Input artifact per kind:
///
/// | kind | data |
/// |---|---|
/// | histogram-grid, correlation-heatmap | numeric CSV with a header row |
/// | burden-distribution | indices CSV with `burden_score` and `affected_systems` |
/// | roc | JSON array of [`LabeledRoc`] |
/// | shap-beeswarm | beeswarm CSV (`row,feature,shap,value,rank`) |
/// | importance-bar | importance CSV (`rank,feature,mean_abs_shap`) |
/// | pdp-panel | JSON array of [`LabeledPdp`] |
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FigureSpec {
    pub kind: FigureKind,
    pub data: PathBuf,
    pub output: PathBuf,
    /// Histogram panels to draw; defaults to the first twelve columns.
    #[serde(default)]
    pub columns: Option<Vec<String>>,
    /// Number of features shown by importance and beeswarm plots.
    #[serde(default)]
    pub top: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledRoc {
    pub model: String,
    pub curve: RocCurve,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledPdp {
    pub feature: String,
    pub curve: PdpCurve,
}

fn malformed(path: &Path, reason: impl ToString) -> ReportError {
    ReportError::Malformed { path: path.to_path_buf(), reason: reason.to_string() }
}

fn read_text(path: &Path) -> Result<String, ReportError> {
    if !path.exists() {
        return Err(ReportError::UnresolvedData(path.to_path_buf()));
    }
    std::fs::read_to_string(path).map_err(|e| malformed(path, e))
}

fn read_records(path: &Path) -> Result<(Vec<String>, Vec<csv::StringRecord>), ReportError> {
    let text = read_text(path)?;
    let mut reader = csv::Reader::from_reader(text.as_bytes());
    let header = reader.headers().map_err(|e| malformed(path, e))?.iter().map(String::from).collect();
    let records = reader.records().collect::<Result<Vec<_>, _>>().map_err(|e| malformed(path, e))?;
    Ok((header, records))
}

/// Column-major numeric CSV.
pub fn read_numeric_csv(path: &Path) -> Result<(Vec<String>, Vec<Vec<f64>>), ReportError> {
    let (header, records) = read_records(path)?;
    let mut columns = vec![Vec::with_capacity(records.len()); header.len()];
    for (r, rec) in records.iter().enumerate() {
        for (c, cell) in rec.iter().enumerate() {
            let v: f64 = cell
                .trim()
                .parse()
                .map_err(|_| malformed(path, format!("row {r}, column {}: {cell:?} is not a number", header[c])))?;
            columns[c].push(v);
        }
    }
    if columns.iter().flatten().any(|v| !v.is_finite()) {
        return Err(malformed(path, "non-finite value"));
    }
    Ok((header, columns))
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T, ReportError> {
    serde_json::from_str(&read_text(path)?).map_err(|e| malformed(path, e))
}

fn field<T: std::str::FromStr>(path: &Path, rec: &csv::StringRecord, i: usize) -> Result<T, ReportError> {
    rec.get(i)
        .and_then(|s| s.parse().ok())
        .ok_or_else(|| malformed(path, format!("bad field {i} in record {:?}", rec.position().map(|p| p.line()))))
}

fn read_importance(path: &Path) -> Result<Vec<ImportanceEntry>, ReportError> {
    let (header, records) = read_records(path)?;
    if header != ["rank", "feature", "mean_abs_shap"] {
        return Err(malformed(path, "expected header rank,feature,mean_abs_shap"));
    }
    records
        .iter()
        .map(|rec| {
            let rank: usize = field(path, rec, 0)?;
            Ok(ImportanceEntry {
                feature: rank.saturating_sub(1),
                name: rec[1].to_string(),
                mean_abs_shap: field(path, rec, 2)?,
            })
        })
        .collect()
}

fn read_beeswarm(path: &Path) -> Result<Vec<BeeswarmRecord>, ReportError> {
    let (header, records) = read_records(path)?;
    if header != ["row", "feature", "shap", "value", "rank"] {
        return Err(malformed(path, "expected header row,feature,shap,value,rank"));
    }
    records
        .iter()
        .map(|rec| {
            Ok(BeeswarmRecord {
                row: field(path, rec, 0)?,
                feature: rec[1].to_string(),
                shap: field(path, rec, 2)?,
                value: field(path, rec, 3)?,
                rank: field(path, rec, 4)?,
            })
        })
        .collect()
}

/// Pairwise Pearson correlations; `None` where a column is constant.
pub fn correlation_matrix(columns: &[Vec<f64>]) -> Vec<Vec<Option<f64>>> {
    columns.iter().map(|a| columns.iter().map(|b| pearson(a, b)).collect()).collect()
}

const DEFAULT_TOP: usize = 10;

pub fn render(spec: &FigureSpec) -> Result<String, ReportError> {
    let path = spec.data.as_path();
    match spec.kind {
        FigureKind::HistogramGrid => {
            let (names, columns) = read_numeric_csv(path)?;
            let wanted: Vec<String> = match &spec.columns {
                Some(c) => c.clone(),
                None => names.iter().take(12).cloned().collect(),
            };
            let panels = wanted
                .iter()
                .map(|w| match names.iter().position(|n| n == w) {
                    Some(i) => Ok((w.clone(), columns[i].clone())),
                    None => Err(malformed(path, format!("no column named {w}"))),
                })
                .collect::<Result<Vec<_>, _>>()?;
            Ok(histogram_grid(&panels, HISTOGRAM_BINS))
        }
        FigureKind::BurdenDistribution => {
            let (names, columns) = read_numeric_csv(path)?;
            let col = |name: &str| -> Result<Vec<u32>, ReportError> {
                let i = names.iter().position(|n| n == name).ok_or_else(|| malformed(path, format!("missing {name}")))?;
                columns[i]
                    .iter()
                    .map(|&v| if v >= 0.0 && v.fract() == 0.0 { Ok(v as u32) } else { Err(malformed(path, "non-integer count")) })
                    .collect()
            };
            Ok(burden_distribution(&col("burden_score")?, &col("affected_systems")?))
        }
        FigureKind::CorrelationHeatmap => {
            let (names, columns) = read_numeric_csv(path)?;
            Ok(correlation_heatmap(&names, &correlation_matrix(&columns)))
        }
        FigureKind::Roc => {
            let curves: Vec<LabeledRoc> = read_json(path)?;
            for c in &curves {
                if c.curve.fpr.len() != c.curve.tpr.len() || c.curve.fpr.is_empty() {
                    return Err(malformed(path, format!("curve {} has mismatched coordinates", c.model)));
                }
            }
            let pairs: Vec<(String, RocCurve)> = curves.into_iter().map(|c| (c.model, c.curve)).collect();
            Ok(roc_plot(&pairs))
        }
        FigureKind::ShapBeeswarm => Ok(shap_beeswarm(&read_beeswarm(path)?, spec.top.unwrap_or(DEFAULT_TOP))),
        FigureKind::ImportanceBar => Ok(importance_bar(&read_importance(path)?, spec.top.unwrap_or(DEFAULT_TOP))),
        FigureKind::PdpPanel => {
            let curves: Vec<LabeledPdp> = read_json(path)?;
            for c in &curves {
                if c.curve.grid.len() != c.curve.response.len() || c.curve.grid.len() < 2 {
                    return Err(malformed(path, format!("curve {} has mismatched or short grid", c.feature)));
                }
            }
            let pairs: Vec<(String, PdpCurve)> = curves.into_iter().map(|c| (c.feature, c.curve)).collect();
            Ok(pdp_panel(&pairs))
        }
    }
}

/// Render and write to `spec.output`.
pub fn render_to_file(spec: &FigureSpec) -> Result<(), ReportError> {
    let svg = render(spec)?;
    std::fs::write(&spec.output, svg).map_err(|source| ReportError::Write { path: spec.output.clone(), source })
}
