//! Config-driven pipeline runner. Each stage reads its inputs from a run
//! directory and writes its outputs back there, recording the config hash of
//! every artifact in `manifest.json`.

mod config;
mod error;
pub mod pipeline;
pub mod store;

pub use config::RunConfig;
pub use error::CliError;
pub use pipeline::{run_all, run_stage, ModelId, Stage, Summary};
pub use store::RunDir;

use std::path::{Path, PathBuf};

/// Resolve the effective config: file (or default), then `--seed`.
pub fn resolve_config(path: Option<&Path>, seed: Option<u64>) -> Result<RunConfig, CliError> {
    let mut cfg = match path {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(s) = seed {
        cfg = cfg.with_seed(s);
    }
    cfg.validate()?;
    Ok(cfg)
}

/// `--out`, else the config's `out`, else `./multisys-run`.
pub fn output_dir(cfg: &RunConfig, out: Option<&Path>) -> PathBuf {
    out.map(Path::to_path_buf).or_else(|| cfg.out.clone()).unwrap_or_else(|| PathBuf::from("multisys-run"))
}
