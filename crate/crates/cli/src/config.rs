use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use multisys_core::explain::PdpOptions;
use multisys_core::models::{BoostingParams, ForestParams, LogisticParams};
use multisys_core::split::SplitRatios;
use multisys_core::synth::GeneratorSpec;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::CliError;

fn default_seed() -> u64 {
    42
}

fn default_folds() -> usize {
    5
}

fn default_threshold() -> f64 {
    multisys_core::metrics::DEFAULT_THRESHOLD
}

fn default_pdp_features() -> usize {
    3
}

fn default_importance_top() -> usize {
    10
}

/// Everything that determines a run's artifacts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// Raw cohort CSV. Exactly one of `input` and `synth` must be set.
    #[serde(default)]
    pub input: Option<PathBuf>,
    #[serde(default)]
    pub synth: Option<GeneratorSpec>,
    /// Schema JSON; the built-in 25-analyte schema when absent.
    #[serde(default)]
    pub schema: Option<PathBuf>,
    /// System definitions JSON; the built-in four systems when absent.
    #[serde(default)]
    pub systems: Option<PathBuf>,
    #[serde(default)]
    pub split: SplitRatios,
    /// Seed for the holdout split, the CV folds and the forest.
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default = "default_folds")]
    pub cv_folds: usize,
    #[serde(default = "default_threshold")]
    pub threshold: f64,
    #[serde(default)]
    pub logistic: LogisticParams,
    #[serde(default)]
    pub forest: ForestParams,
    #[serde(default)]
    pub boosting: BoostingParams,
    #[serde(default)]
    pub pdp: PdpOptions,
    #[serde(default = "default_pdp_features")]
    pub pdp_features: usize,
    #[serde(default = "default_importance_top")]
    pub importance_top: usize,
    /// Output directory; `--out` takes precedence.
    #[serde(default, skip_serializing)]
    pub out: Option<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            input: None,
            synth: Some(GeneratorSpec::default()),
            schema: None,
            systems: None,
            split: SplitRatios::default(),
            seed: default_seed(),
            cv_folds: default_folds(),
            threshold: default_threshold(),
            logistic: LogisticParams::default(),
            forest: ForestParams::default(),
            boosting: BoostingParams::default(),
            pdp: PdpOptions::default(),
            pdp_features: default_pdp_features(),
            importance_top: default_importance_top(),
            out: None,
        }
    }
}

impl RunConfig {
    /// Parse a config file; relative paths inside it resolve against its directory.
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        let mut cfg: RunConfig =
            serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        for p in [&mut cfg.input, &mut cfg.schema, &mut cfg.systems, &mut cfg.out].into_iter().flatten() {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        Ok(cfg)
    }

    /// `--seed` replaces the pipeline seed and, for synthetic runs, the generator seed.
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        if let Some(s) = &mut self.synth {
            s.seed = seed;
        }
        self
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let bad = |m: String| Err(CliError::Config(m));
        match (&self.input, &self.synth) {
            (Some(_), Some(_)) => return bad("set exactly one of `input` and `synth`, not both".into()),
            (None, None) => return bad("set exactly one of `input` and `synth`".into()),
            (None, Some(spec)) => spec.validate().map_err(|e| CliError::Config(e.to_string()))?,
            (Some(_), None) => {}
        }
        self.split.validate().map_err(|e| CliError::Config(e.to_string()))?;
        if self.cv_folds < 2 {
            return bad(format!("cv_folds must be at least 2, got {}", self.cv_folds));
        }
        if !(self.threshold.is_finite() && (0.0..=1.0).contains(&self.threshold)) {
            return bad(format!("threshold must lie in [0, 1], got {}", self.threshold));
        }
        if !(self.logistic.c.is_finite() && self.logistic.c > 0.0) {
            return bad("logistic.c must be positive".into());
        }
        if self.forest.n_trees == 0 {
            return bad("forest.n_trees must be at least 1".into());
        }
        if !(self.boosting.learning_rate > 0.0 && self.boosting.learning_rate <= 1.0) {
            return bad("boosting.learning_rate must lie in (0, 1]".into());
        }
        if self.forest.min_samples_leaf == 0 || self.boosting.min_samples_leaf == 0 {
            return bad("min_samples_leaf must be at least 1".into());
        }
        if self.pdp.grid_size < 2 {
            return bad("pdp.grid_size must be at least 2".into());
        }
        Ok(())
    }

    /// SHA-256 over the canonical config JSON plus the contents of every referenced file.
    pub fn hash(&self) -> Result<String, CliError> {
        let mut files = BTreeMap::new();
        for (key, path) in [("input", &self.input), ("schema", &self.schema), ("systems", &self.systems)] {
            if let Some(p) = path {
                let bytes = std::fs::read(p).map_err(|source| CliError::Io { path: p.clone(), source })?;
                files.insert(key, hex::encode(Sha256::digest(&bytes)));
            }
        }
        let mut value = serde_json::to_value(self).expect("config serializes");
        // Paths themselves do not matter, only what they point to.
        if let Some(map) = value.as_object_mut() {
            for key in ["input", "schema", "systems"] {
                map.remove(key);
            }
            map.insert("files".into(), serde_json::to_value(files).expect("map serializes"));
        }
        let canonical = serde_json::to_string(&value).expect("value serializes");
        Ok(hex::encode(Sha256::digest(canonical.as_bytes())))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_is_valid_synthetic() {
        let c = RunConfig::default();
        c.validate().unwrap();
        assert_eq!(c.seed, 42);
        assert_eq!(c.cv_folds, 5);
    }

    #[test]
    fn exactly_one_source() {
        let mut c = RunConfig { input: Some("x.csv".into()), ..Default::default() };
        assert!(matches!(c.validate(), Err(CliError::Config(_))));
        c.synth = None;
        c.input = None;
        assert!(matches!(c.validate(), Err(CliError::Config(_))));
    }

    #[test]
    fn ratios_must_sum_to_one() {
        let c = RunConfig { split: SplitRatios { train: 0.7, validation: 0.2, test: 0.2 }, ..Default::default() };
        assert!(c.validate().is_err());
    }

    #[test]
    fn hash_tracks_content_not_output_dir() {
        let a = RunConfig::default();
        let mut b = a.clone();
        b.out = Some("/elsewhere".into());
        assert_eq!(a.hash().unwrap(), b.hash().unwrap());
        assert_ne!(a.hash().unwrap(), a.clone().with_seed(7).hash().unwrap());
        assert_eq!(a.hash().unwrap().len(), 64);
    }

    #[test]
    fn partial_config_fills_defaults() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.json");
        std::fs::write(&path, r#"{"synth": {"n": 50, "seed": 1, "analytes": []}, "cv_folds": 3}"#).unwrap();
        let c = RunConfig::load(&path).unwrap();
        assert_eq!(c.cv_folds, 3);
        assert_eq!(c.boosting, BoostingParams::default());
        std::fs::write(&path, r#"{"synth": null, "bogus": 1}"#).unwrap();
        assert!(RunConfig::load(&path).is_err());
    }
}
