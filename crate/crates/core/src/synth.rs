//! Seeded synthetic cohorts whose marginals follow routine inpatient lab
//! distributions. Cells carry unit text so generated files exercise the
//! parser exactly like real exports.

use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ingest::{RawCohort, SemiquantTokens, ORDINAL_LEVELS};
use crate::rng::SplitMix64;

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("cohort size must be at least 1")]
    EmptyCohort,
    #[error("analyte {analyte}: {reason}")]
    InvalidAnalyte { analyte: String, reason: String },
    #[error("factor {factor}: {reason}")]
    InvalidFactor { factor: String, reason: String },
    #[error("duplicate analyte {0}")]
    DuplicateAnalyte(String),
    #[error("reading generator spec: {0}")]
    Io(#[from] std::io::Error),
    #[error("parsing generator spec: {0}")]
    Parse(#[from] serde_json::Error),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum Distribution {
    /// `exp(N(ln median, sigma²))`.
    LogNormal { median: f64, sigma: f64 },
    Normal { mean: f64, sd: f64 },
    /// Weighted lognormal/normal components, sampled through the mixture quantile function.
    Mixture { components: Vec<MixtureComponent> },
    /// Probabilities over negative, trace, 1+, 2+, 3+.
    Categorical { probabilities: [f64; 5] },
    /// Column present with every cell blank.
    Absent,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixtureComponent {
    pub weight: f64,
    pub distribution: Distribution,
}

impl Distribution {
    /// Median of the untruncated distribution, for continuous families.
    pub fn median(&self) -> Option<f64> {
        match self {
            Distribution::LogNormal { median, .. } => Some(*median),
            Distribution::Normal { mean, .. } => Some(*mean),
            Distribution::Mixture { .. } => Some(self.quantile(0.5)),
            _ => None,
        }
    }

    fn is_continuous(&self) -> bool {
        matches!(self, Distribution::LogNormal { .. } | Distribution::Normal { .. } | Distribution::Mixture { .. })
    }

    fn cdf(&self, x: f64) -> f64 {
        match self {
            Distribution::LogNormal { median, sigma } if x > 0.0 => normal_cdf((x / median).ln() / sigma),
            Distribution::LogNormal { .. } => 0.0,
            Distribution::Normal { mean, sd } => normal_cdf((x - mean) / sd),
            Distribution::Mixture { components } => components.iter().map(|c| c.weight * c.distribution.cdf(x)).sum(),
            _ => unreachable!("only continuous families have a cdf"),
        }
    }

    /// Interval holding all but a negligible sliver of the mass.
    fn support(&self) -> (f64, f64) {
        match self {
            Distribution::LogNormal { median, sigma } => (median * (-12.0 * sigma).exp(), median * (12.0 * sigma).exp()),
            Distribution::Normal { mean, sd } => (mean - 12.0 * sd, mean + 12.0 * sd),
            Distribution::Mixture { components } => components.iter().map(|c| c.distribution.support()).fold(
                (f64::INFINITY, f64::NEG_INFINITY),
                |(lo, hi), (l, h)| (lo.min(l), hi.max(h)),
            ),
            _ => unreachable!("only continuous families have a support"),
        }
    }

    fn quantile(&self, q: f64) -> f64 {
        let (mut lo, mut hi) = self.support();
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if self.cdf(mid) < q {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    }

    fn transform(&self, z: f64) -> f64 {
        match self {
            Distribution::LogNormal { median, sigma } => median * (sigma * z).exp(),
            Distribution::Normal { mean, sd } => mean + sd * z,
            Distribution::Mixture { .. } => self.quantile(normal_cdf(z)),
            _ => unreachable!("only continuous families transform normals"),
        }
    }

    fn validate(&self) -> Result<(), String> {
        match self {
            Distribution::LogNormal { median, sigma } => {
                if !(median.is_finite() && *median > 0.0) {
                    return Err("lognormal median must be positive".into());
                }
                if !(sigma.is_finite() && *sigma > 0.0) {
                    return Err("sigma must be positive".into());
                }
            }
            Distribution::Normal { mean, sd } => {
                if !mean.is_finite() || !(sd.is_finite() && *sd > 0.0) {
                    return Err("normal needs a finite mean and positive sd".into());
                }
            }
            Distribution::Mixture { components } => {
                if components.is_empty() {
                    return Err("mixture needs at least one component".into());
                }
                for c in components {
                    if !matches!(c.distribution, Distribution::LogNormal { .. } | Distribution::Normal { .. }) {
                        return Err("mixture components must be lognormal or normal".into());
                    }
                    if !(c.weight.is_finite() && c.weight > 0.0) {
                        return Err("mixture weights must be positive".into());
                    }
                    c.distribution.validate()?;
                }
                if (components.iter().map(|c| c.weight).sum::<f64>() - 1.0).abs() > 1e-9 {
                    return Err("mixture weights must sum to 1".into());
                }
            }
            Distribution::Categorical { probabilities } => {
                if probabilities.iter().any(|p| !(p.is_finite() && *p >= 0.0)) {
                    return Err("probabilities must be non-negative".into());
                }
                if (probabilities.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
                    return Err("probabilities must sum to 1".into());
                }
            }
            Distribution::Absent => {}
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalyteSpec {
    pub name: String,
    pub unit: String,
    #[serde(default)]
    pub decimals: usize,
    pub distribution: Distribution,
    #[serde(default)]
    pub lower: Option<f64>,
    #[serde(default)]
    pub upper: Option<f64>,
}

impl AnalyteSpec {
    fn continuous(name: &str, unit: &str, decimals: usize, distribution: Distribution, lower: f64, upper: f64) -> Self {
        Self { name: name.into(), unit: unit.into(), decimals, distribution, lower: Some(lower), upper: Some(upper) }
    }

    fn categorical(name: &str, probabilities: [f64; 5]) -> Self {
        Self {
            name: name.into(),
            unit: String::new(),
            decimals: 0,
            distribution: Distribution::Categorical { probabilities },
            lower: None,
            upper: None,
        }
    }

    fn absent(name: &str, unit: &str) -> Self {
        Self { name: name.into(), unit: unit.into(), decimals: 0, distribution: Distribution::Absent, lower: None, upper: None }
    }

    fn validate(&self) -> Result<(), SynthError> {
        let bad = |reason: &str| Err(SynthError::InvalidAnalyte { analyte: self.name.clone(), reason: reason.into() });
        if let Err(reason) = self.distribution.validate() {
            return bad(&reason);
        }
        if let (Some(lo), Some(hi)) = (self.lower, self.upper) {
            if lo >= hi {
                return bad("truncation bounds must satisfy lower < upper");
            }
        }
        if let Some(m) = self.distribution.median() {
            if self.lower.is_some_and(|lo| m < lo) || self.upper.is_some_and(|hi| m > hi) {
                return bad("median lies outside the truncation bounds");
            }
        }
        Ok(())
    }

    fn accepts(&self, v: f64) -> bool {
        self.lower.is_none_or(|lo| v >= lo) && self.upper.is_none_or(|hi| v <= hi)
    }
}

/// Shared standard-normal factor. Each analyte's latent normal is
/// `Σ loading·u + sqrt(1 - Σ loading²)·e`; categorical analytes map it
/// through the normal CDF onto their level probabilities.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatentFactor {
    pub name: String,
    pub loadings: Vec<(String, f64)>,
}

/// Missing fields in a serialized spec take the calibrated defaults.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GeneratorSpec {
    pub n: usize,
    pub seed: u64,
    pub analytes: Vec<AnalyteSpec>,
    pub factors: Vec<LatentFactor>,
}

const MAX_REDRAWS: usize = 10_000;

impl Default for GeneratorSpec {
    fn default() -> Self {
        use Distribution::{LogNormal, Normal};
        let c = AnalyteSpec::continuous;
        let mix = |parts: &[(f64, Distribution)]| Distribution::Mixture {
            components: parts.iter().map(|(weight, d)| MixtureComponent { weight: *weight, distribution: d.clone() }).collect(),
        };
        let cat = AnalyteSpec::categorical;
        let analytes = vec![
            c("Cr", "μmol/L", 1, mix(&[(0.955, LogNormal { median: 61.0, sigma: 0.22 }), (0.045, LogNormal { median: 165.0, sigma: 0.5 })]), 24.6, 1816.0),
            c("UA", "μmol/L", 1, Normal { mean: 330.0, sd: 88.0 }, 117.0, 792.0),
            c("ALB", "g/L", 1, Normal { mean: 40.4, sd: 3.2 }, 19.6, 49.1),
            c("HDL-c", "mmol/L", 2, LogNormal { median: 1.13, sigma: 0.22 }, 0.48, 4.18),
            c("LDL-c", "mmol/L", 2, Normal { mean: 2.80, sd: 0.85 }, 0.31, 5.76),
            c("TG", "mmol/L", 2, LogNormal { median: 1.43, sigma: 0.6 }, 0.30, 17.96),
            c("TC", "mmol/L", 2, Normal { mean: 4.76, sd: 1.08 }, 1.66, 15.96),
            c("GLU", "mmol/L", 2, mix(&[(0.85, LogNormal { median: 3.9, sigma: 0.2 }), (0.15, LogNormal { median: 10.0, sigma: 0.35 })]), 1.0, 37.8),
            c("WBC", "×10⁹/L", 2, mix(&[(0.95, LogNormal { median: 6.4, sigma: 0.2 }), (0.05, LogNormal { median: 13.0, sigma: 0.25 })]), 2.24, 26.35),
            c("Hb", "g/L", 0, Normal { mean: 139.0, sd: 17.8 }, 57.0, 215.0),
            c("PLT", "×10⁹/L", 0, LogNormal { median: 222.5, sigma: 0.24 }, 62.0, 830.0),
            c("HCT", "L/L", 3, Normal { mean: 0.42, sd: 0.045 }, 0.20, 0.66),
            c("MCV", "fL", 1, Normal { mean: 90.0, sd: 5.5 }, 60.0, 120.0),
            c("MCH", "pg", 1, Normal { mean: 30.2, sd: 2.1 }, 18.0, 40.0),
            c("MPV", "fL", 1, LogNormal { median: 10.2, sigma: 0.12 }, 6.0, 16.0),
            c("γ-GT", "U/L", 0, LogNormal { median: 22.0, sigma: 0.7 }, 4.0, 900.0),
            c("RBC", "×10¹²/L", 2, Normal { mean: 4.6, sd: 0.55 }, 2.0, 7.0),
            AnalyteSpec::absent("BUN", "mmol/L"),
            AnalyteSpec::absent("AST", "U/L"),
            AnalyteSpec::absent("ALT", "U/L"),
            cat("PRO", [0.94, 0.055, 0.004, 0.001, 0.0]),
            cat("LEU", [0.94, 0.057, 0.002, 0.001, 0.0]),
            cat("NIT", [0.998, 0.0, 0.002, 0.0, 0.0]),
            cat("KET", [0.975, 0.022, 0.002, 0.001, 0.0]),
            cat("ERY", [0.85, 0.08, 0.04, 0.02, 0.01]),
        ];
        let factor = |name: &str, loadings: &[(&str, f64)]| LatentFactor {
            name: name.into(),
            loadings: loadings.iter().map(|(a, l)| (a.to_string(), *l)).collect(),
        };
        let factors = vec![
            factor("triglyceride", &[("TG", 0.85), ("HDL-c", -0.8), ("TC", 0.3), ("GLU", 0.3)]),
            factor("cholesterol", &[("LDL-c", 0.8), ("TC", 0.8)]),
            factor("erythroid", &[("Hb", 0.9), ("RBC", 0.8), ("HCT", 0.9)]),
            factor("red-cell-index", &[("MCV", 0.8), ("MCH", 0.8)]),
            factor("renal", &[("Cr", 0.6), ("PRO", 0.7)]),
            factor("glycaemic", &[("GLU", 0.5), ("KET", 0.7)]),
            factor("leukocyte", &[("WBC", 0.6), ("LEU", 0.7), ("NIT", 0.6)]),
        ];
        Self { n: 1195, seed: 42, analytes, factors }
    }
}

impl GeneratorSpec {
    pub fn from_json_str(text: &str) -> Result<Self, SynthError> {
        let spec: Self = serde_json::from_str(text)?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn load(path: &Path) -> Result<Self, SynthError> {
        Self::from_json_str(&std::fs::read_to_string(path)?)
    }

    pub fn validate(&self) -> Result<(), SynthError> {
        if self.n == 0 {
            return Err(SynthError::EmptyCohort);
        }
        let mut seen = std::collections::HashSet::new();
        for a in &self.analytes {
            if !seen.insert(a.name.as_str()) {
                return Err(SynthError::DuplicateAnalyte(a.name.clone()));
            }
            a.validate()?;
        }
        self.loadings().map(|_| ())
    }

    /// Matrix of loadings, analyte-major.
    fn loadings(&self) -> Result<Vec<Vec<f64>>, SynthError> {
        let mut out = vec![vec![0.0; self.factors.len()]; self.analytes.len()];
        for (k, f) in self.factors.iter().enumerate() {
            for (name, l) in &f.loadings {
                let bad = |reason: String| Err(SynthError::InvalidFactor { factor: f.name.clone(), reason });
                let Some(a) = self.analytes.iter().position(|a| &a.name == name) else {
                    return bad(format!("unknown analyte {name}"));
                };
                if !self.analytes[a].distribution.is_continuous()
                    && !matches!(self.analytes[a].distribution, Distribution::Categorical { .. })
                {
                    return bad(format!("{name} is never generated"));
                }
                if !l.is_finite() {
                    return bad(format!("non-finite loading for {name}"));
                }
                out[a][k] = *l;
            }
        }
        for (a, row) in out.iter().enumerate() {
            if row.iter().map(|l| l * l).sum::<f64>() >= 1.0 {
                return Err(SynthError::InvalidFactor {
                    factor: self.analytes[a].name.clone(),
                    reason: "squared loadings must sum to less than 1".into(),
                });
            }
        }
        Ok(out)
    }
}

fn normal_cdf(z: f64) -> f64 {
    0.5 * libm::erfc(-z / std::f64::consts::SQRT_2)
}

fn latent(rng: &mut SplitMix64, load: &[f64], factors: &[f64]) -> f64 {
    let shared: f64 = load.iter().zip(factors).map(|(l, u)| l * u).sum();
    let unique = (1.0 - load.iter().map(|l| l * l).sum::<f64>()).sqrt();
    shared + unique * rng.standard_normal()
}

/// Level whose cumulative-probability band contains `u`. Higher latent
/// values map to higher levels.
fn draw_categorical(u: f64, probabilities: &[f64; 5]) -> f64 {
    let mut acc = 0.0;
    for (p, level) in probabilities.iter().zip(ORDINAL_LEVELS) {
        acc += p;
        if u < acc {
            return level;
        }
    }
    // Rounding left a sliver above the cumulative total: use the last level with mass.
    let last = probabilities.iter().rposition(|&p| p > 0.0).unwrap_or(0);
    ORDINAL_LEVELS[last]
}

/// Deterministic per seed. Rows are drawn one patient at a time: factors
/// first, then every analyte in spec order.
pub fn generate(spec: &GeneratorSpec) -> Result<RawCohort, SynthError> {
    spec.validate()?;
    let loadings = spec.loadings()?;
    let tokens = SemiquantTokens::default();
    let mut rng = SplitMix64::new(spec.seed);
    let columns: Vec<String> = spec.analytes.iter().map(|a| a.name.clone()).collect();
    let mut rows = Vec::with_capacity(spec.n);
    let mut factors = vec![0.0; spec.factors.len()];
    for _ in 0..spec.n {
        factors.iter_mut().for_each(|u| *u = rng.standard_normal());
        let row = spec
            .analytes
            .iter()
            .zip(&loadings)
            .map(|(a, load)| match &a.distribution {
                Distribution::Absent => String::new(),
                Distribution::Categorical { probabilities } => {
                    let z = latent(&mut rng, load, &factors);
                    let level = draw_categorical(normal_cdf(z), probabilities);
                    tokens.render(level).unwrap_or_default().to_string()
                }
                d => {
                    let shared: f64 = load.iter().zip(&factors).map(|(l, u)| l * u).sum();
                    let unique = (1.0 - load.iter().map(|l| l * l).sum::<f64>()).sqrt();
                    let mut value = d.transform(shared + unique * rng.standard_normal());
                    for _ in 0..MAX_REDRAWS {
                        if a.accepts(value) {
                            break;
                        }
                        value = d.transform(shared + unique * rng.standard_normal());
                    }
                    let value = value.clamp(a.lower.unwrap_or(f64::MIN), a.upper.unwrap_or(f64::MAX));
                    if a.unit.is_empty() {
                        format!("{value:.*}", a.decimals)
                    } else {
                        format!("{value:.*} {}", a.decimals, a.unit)
                    }
                }
            })
            .collect();
        rows.push(row);
    }
    Ok(RawCohort::new(columns, rows).expect("generated rows are rectangular with unique names"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::indices::{compute_indices, SystemSet};
    use crate::ingest::{clean, parse_quantity, parse_semiquant, SchemaConfig};
    use crate::stats::{median, pearson};

    fn default_cohort() -> RawCohort {
        generate(&GeneratorSpec::default()).unwrap()
    }

    #[test]
    fn zero_rows_rejected() {
        let spec = GeneratorSpec { n: 0, ..Default::default() };
        assert!(matches!(generate(&spec), Err(SynthError::EmptyCohort)));
    }

    #[test]
    fn invalid_specs_rejected() {
        let mut spec = GeneratorSpec::default();
        spec.analytes[0].distribution = Distribution::LogNormal { median: 62.0, sigma: 0.0 };
        assert!(spec.validate().is_err());
        let mut spec = GeneratorSpec::default();
        spec.analytes[20].distribution = Distribution::Categorical { probabilities: [0.5, 0.2, 0.2, 0.0, 0.0] };
        assert!(spec.validate().is_err());
        let mut spec = GeneratorSpec::default();
        spec.analytes[0].lower = Some(3000.0);
        assert!(spec.validate().is_err());
        let mut spec = GeneratorSpec::default();
        spec.factors[0].loadings.push(("BUN".into(), 0.1));
        assert!(spec.validate().is_err());
    }

    #[test]
    fn same_seed_same_bytes() {
        let write = |spec: &GeneratorSpec| {
            let mut buf = Vec::new();
            generate(spec).unwrap().write_csv(&mut buf).unwrap();
            buf
        };
        let spec = GeneratorSpec { n: 200, ..Default::default() };
        assert_eq!(write(&spec), write(&spec));
        assert_ne!(write(&spec), write(&GeneratorSpec { seed: 43, ..spec }));
    }

    #[test]
    fn every_cell_parses() {
        let spec = GeneratorSpec::default();
        let cohort = generate(&spec).unwrap();
        for (j, a) in spec.analytes.iter().enumerate() {
            for row in cohort.rows() {
                let cell = &row[j];
                match a.distribution {
                    Distribution::Absent => assert!(cell.is_empty()),
                    Distribution::Categorical { .. } => assert!(parse_semiquant(cell).is_some(), "{cell}"),
                    _ => {
                        let v = parse_quantity(cell).unwrap_or_else(|| panic!("{cell}"));
                        assert!(a.accepts(v), "{} {v}", a.name);
                    }
                }
            }
        }
    }

    #[test]
    fn medians_follow_the_spec() {
        let spec = GeneratorSpec::default();
        let cohort = default_cohort();
        for (j, a) in spec.analytes.iter().enumerate() {
            if let Some(target) = a.distribution.median() {
                let values: Vec<f64> = cohort.rows().iter().map(|r| parse_quantity(&r[j]).unwrap()).collect();
                let m = median(&values).unwrap();
                assert!((m - target).abs() <= 0.1 * target.abs(), "{}: {m} vs {target}", a.name);
            }
        }
    }

    #[test]
    fn prevalences_land_near_the_registry() {
        let cohort = default_cohort();
        let (fm, _) = clean(&cohort, &SchemaConfig::default()).unwrap();
        let idx = compute_indices(&fm, &SystemSet::default()).unwrap();
        let summary = crate::indices::prevalence_summary(&idx).unwrap();
        assert!((summary.target_prevalence - 0.168).abs() <= 0.04, "{summary:?}");
        let lipid = summary.systems.iter().find(|s| s.system.as_str() == "lipid").unwrap();
        assert!((lipid.prevalence - 0.65).abs() <= 0.08, "{}", lipid.prevalence);
    }

    #[test]
    fn latent_factors_induce_correlation() {
        let cohort = default_cohort();
        let col = |name: &str| {
            let j = cohort.column_index(name).unwrap();
            cohort.rows().iter().map(|r| parse_quantity(&r[j]).unwrap()).collect::<Vec<_>>()
        };
        assert!(pearson(&col("Hb"), &col("HCT")).unwrap() > 0.6);
        assert!(pearson(&col("TG"), &col("HDL-c")).unwrap() < -0.15);
        assert!(pearson(&col("GLU"), &col("Hb")).unwrap().abs() < 0.1);
    }

    #[test]
    fn spec_round_trips_through_json() {
        let spec = GeneratorSpec::default();
        let text = serde_json::to_string(&spec).unwrap();
        assert_eq!(GeneratorSpec::from_json_str(&text).unwrap(), spec);
    }
}
