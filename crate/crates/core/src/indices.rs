//! System abnormality flags, grades, burden score and the multi-system target.

use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ingest::FeatureMatrix;
use crate::stats;

#[derive(Debug, Error)]
pub enum IndicesError {
    #[error("rule references analyte {0}, which is not in the feature matrix")]
    MissingAnalyte(String),
    #[error("invalid system definitions: {0}")]
    InvalidDefinition(String),
    #[error("cannot read system definitions {path}: {source}")]
    Io { path: std::path::PathBuf, source: std::io::Error },
    #[error("malformed system definitions: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("cannot summarise an empty cohort")]
    EmptyCohort,
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    /// Strictly greater than the cutoff.
    Above,
    /// Strictly less than the cutoff.
    Below,
    /// Greater than or equal to the cutoff (dipstick "≥ 1+").
    AtOrAbove,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThresholdRule {
    pub analyte: String,
    pub direction: Direction,
    pub cutoff: f64,
}

impl ThresholdRule {
    pub fn new(analyte: &str, direction: Direction, cutoff: f64) -> Self {
        Self { analyte: analyte.to_string(), direction, cutoff }
    }

    pub fn evaluate(&self, value: f64) -> bool {
        evaluate_rule(value, self)
    }
}

impl fmt::Display for ThresholdRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let op = match self.direction {
            Direction::Above => ">",
            Direction::Below => "<",
            Direction::AtOrAbove => ">=",
        };
        write!(f, "{} {} {}", self.analyte, op, self.cutoff)
    }
}

pub fn evaluate_rule(value: f64, rule: &ThresholdRule) -> bool {
    match rule.direction {
        Direction::Above => value > rule.cutoff,
        Direction::Below => value < rule.cutoff,
        Direction::AtOrAbove => value >= rule.cutoff,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SystemName {
    Kidney,
    Lipid,
    Inflamm,
    Metabolic,
}

impl SystemName {
    pub const ALL: [SystemName; 4] = [SystemName::Kidney, SystemName::Lipid, SystemName::Inflamm, SystemName::Metabolic];

    pub fn as_str(self) -> &'static str {
        match self {
            SystemName::Kidney => "kidney",
            SystemName::Lipid => "lipid",
            SystemName::Inflamm => "inflamm",
            SystemName::Metabolic => "metabolic",
        }
    }

    fn slot(self) -> usize {
        self as usize
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SystemDefinition {
    pub name: SystemName,
    pub rules: Vec<ThresholdRule>,
}

/// The four system definitions, held in canonical order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SystemSet {
    pub systems: Vec<SystemDefinition>,
}

impl Default for SystemSet {
    fn default() -> Self {
        use Direction::*;
        let r = ThresholdRule::new;
        Self {
            systems: vec![
                SystemDefinition {
                    name: SystemName::Kidney,
                    rules: vec![r("Cr", Above, 110.0), r("BUN", Above, 8.2), r("PRO", AtOrAbove, 1.0)],
                },
                SystemDefinition {
                    name: SystemName::Lipid,
                    rules: vec![r("TG", Above, 1.70), r("LDL-c", Above, 3.37), r("HDL-c", Below, 1.04)],
                },
                SystemDefinition {
                    name: SystemName::Inflamm,
                    rules: vec![r("WBC", Above, 10.0), r("LEU", AtOrAbove, 1.0), r("NIT", AtOrAbove, 1.0)],
                },
                SystemDefinition {
                    name: SystemName::Metabolic,
                    rules: vec![r("GLU", Above, 7.0), r("KET", AtOrAbove, 1.0)],
                },
            ],
        }
    }
}

impl SystemSet {
    /// Validate and sort into canonical order.
    pub fn new(mut systems: Vec<SystemDefinition>) -> Result<Self, IndicesError> {
        systems.sort_by_key(|s| s.name);
        let set = Self { systems };
        set.validate()?;
        Ok(set)
    }

    pub fn load(path: &Path) -> Result<Self, IndicesError> {
        let text = std::fs::read_to_string(path)
            .map_err(|source| IndicesError::Io { path: path.to_path_buf(), source })?;
        let parsed: SystemSet = serde_json::from_str(&text)?;
        Self::new(parsed.systems)
    }

    pub fn validate(&self) -> Result<(), IndicesError> {
        let names: Vec<SystemName> = self.systems.iter().map(|s| s.name).collect();
        if names != SystemName::ALL {
            return Err(IndicesError::InvalidDefinition(format!(
                "expected exactly one definition per system, got {names:?}"
            )));
        }
        for s in &self.systems {
            if !(2..=3).contains(&s.rules.len()) {
                return Err(IndicesError::InvalidDefinition(format!(
                    "system {} has {} rules, expected 2 or 3",
                    s.name.as_str(),
                    s.rules.len()
                )));
            }
            if let Some(rule) = s.rules.iter().find(|r| !r.cutoff.is_finite()) {
                return Err(IndicesError::InvalidDefinition(format!("non-finite cutoff in {rule}")));
            }
        }
        Ok(())
    }

    pub fn get(&self, name: SystemName) -> &SystemDefinition {
        &self.systems[name.slot()]
    }
}

/// Index values for one patient. Flags, burden and target are derived from
/// the grades so the invariants between them hold by construction.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PatientIndices {
    /// Exceedance counts in canonical system order.
    pub grades: [u32; 4],
    /// Which rules fired, flattened over systems in canonical order.
    pub rule_hits: Vec<bool>,
}

impl PatientIndices {
    pub fn grade(&self, system: SystemName) -> u32 {
        self.grades[system.slot()]
    }

    pub fn flag(&self, system: SystemName) -> bool {
        self.grade(system) >= 1
    }

    pub fn burden_score(&self) -> u32 {
        self.grades.iter().sum()
    }

    pub fn affected_systems(&self) -> u32 {
        self.grades.iter().filter(|&&g| g >= 1).count() as u32
    }

    pub fn target_multi(&self) -> bool {
        self.affected_systems() >= 2
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SystemIndices {
    pub systems: SystemSet,
    pub patients: Vec<PatientIndices>,
}

impl SystemIndices {
    pub fn len(&self) -> usize {
        self.patients.len()
    }

    pub fn is_empty(&self) -> bool {
        self.patients.is_empty()
    }

    pub fn targets(&self) -> Vec<bool> {
        self.patients.iter().map(PatientIndices::target_multi).collect()
    }

    pub fn write_csv<W: std::io::Write>(&self, writer: W) -> Result<(), IndicesError> {
        let mut w = csv::Writer::from_writer(writer);
        let mut header = vec!["row".to_string()];
        header.extend(SystemName::ALL.iter().map(|s| format!("{}_flag", s.as_str())));
        header.extend(SystemName::ALL.iter().map(|s| format!("{}_grade", s.as_str())));
        header.extend(["burden_score", "affected_systems", "target_multi"].map(String::from));
        w.write_record(&header)?;
        for (i, p) in self.patients.iter().enumerate() {
            let mut rec = vec![i.to_string()];
            rec.extend(SystemName::ALL.iter().map(|&s| u8::from(p.flag(s)).to_string()));
            rec.extend(SystemName::ALL.iter().map(|&s| p.grade(s).to_string()));
            rec.push(p.burden_score().to_string());
            rec.push(p.affected_systems().to_string());
            rec.push(u8::from(p.target_multi()).to_string());
            w.write_record(&rec)?;
        }
        w.flush().map_err(|e| IndicesError::Csv(e.into()))?;
        Ok(())
    }
}

pub fn compute_indices(matrix: &FeatureMatrix, systems: &SystemSet) -> Result<SystemIndices, IndicesError> {
    systems.validate()?;
    let mut plan = Vec::new();
    for s in &systems.systems {
        for rule in &s.rules {
            let col = matrix
                .column_index(&rule.analyte)
                .ok_or_else(|| IndicesError::MissingAnalyte(rule.analyte.clone()))?;
            plan.push((s.name.slot(), col, rule));
        }
    }
    let values = matrix.values();
    let patients = (0..values.rows())
        .map(|r| {
            let mut grades = [0u32; 4];
            let rule_hits = plan
                .iter()
                .map(|&(slot, col, rule)| {
                    let hit = evaluate_rule(values.get(r, col), rule);
                    grades[slot] += u32::from(hit);
                    hit
                })
                .collect();
            PatientIndices { grades, rule_hits }
        })
        .collect();
    Ok(SystemIndices { systems: systems.clone(), patients })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RulePrevalence {
    pub rule: String,
    pub count: usize,
    pub prevalence: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SystemPrevalence {
    pub system: SystemName,
    pub count: usize,
    pub prevalence: f64,
    pub rules: Vec<RulePrevalence>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrevalenceSummary {
    pub n: usize,
    pub systems: Vec<SystemPrevalence>,
    pub target_count: usize,
    pub target_prevalence: f64,
    pub burden_mean: f64,
    /// Sample standard deviation.
    pub burden_sd: f64,
    /// Patients with 0, 1, 2, 3, 4 affected systems.
    pub affected_distribution: [usize; 5],
}

pub fn prevalence_summary(indices: &SystemIndices) -> Result<PrevalenceSummary, IndicesError> {
    let n = indices.len();
    if n == 0 {
        return Err(IndicesError::EmptyCohort);
    }
    let frac = |c: usize| c as f64 / n as f64;
    let mut offset = 0;
    let systems = indices
        .systems
        .systems
        .iter()
        .map(|def| {
            let count = indices.patients.iter().filter(|p| p.flag(def.name)).count();
            let rules = def
                .rules
                .iter()
                .enumerate()
                .map(|(k, rule)| {
                    let c = indices.patients.iter().filter(|p| p.rule_hits[offset + k]).count();
                    RulePrevalence { rule: rule.to_string(), count: c, prevalence: frac(c) }
                })
                .collect();
            offset += def.rules.len();
            SystemPrevalence { system: def.name, count, prevalence: frac(count), rules }
        })
        .collect();
    let target_count = indices.patients.iter().filter(|p| p.target_multi()).count();
    let burden: Vec<f64> = indices.patients.iter().map(|p| f64::from(p.burden_score())).collect();
    let mut affected_distribution = [0usize; 5];
    for p in &indices.patients {
        affected_distribution[p.affected_systems() as usize] += 1;
    }
    Ok(PrevalenceSummary {
        n,
        systems,
        target_count,
        target_prevalence: frac(target_count),
        burden_mean: stats::mean(&burden).unwrap_or(0.0),
        burden_sd: stats::sample_sd(&burden).unwrap_or(0.0),
        affected_distribution,
    })
}
