use std::path::PathBuf;

use serde_json::json;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("invalid config: {0}")]
    Config(String),
    #[error("missing {what} artifact: {path}")]
    MissingArtifact { what: &'static str, path: PathBuf },
    #[error("artifact {path} was produced by config {found}, current config is {expected}; rerun with --force to override")]
    StaleArtifact { path: PathBuf, found: String, expected: String },
    #[error("output directory holds artifacts from config(s) {found:?}, current config is {expected}; rerun with --force to overwrite")]
    MixedArtifacts { found: Vec<String>, expected: String },
    #[error("malformed artifact {path}: {reason}")]
    MalformedArtifact { path: PathBuf, reason: String },
    #[error("{stage}: {message}")]
    Stage { stage: &'static str, message: String },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl CliError {
    pub fn kind(&self) -> &'static str {
        match self {
            CliError::Config(_) => "config",
            CliError::MissingArtifact { .. } => "missing_artifact",
            CliError::StaleArtifact { .. } => "stale_artifact",
            CliError::MixedArtifacts { .. } => "mixed_artifacts",
            CliError::MalformedArtifact { .. } => "malformed_artifact",
            CliError::Stage { .. } => "stage_failed",
            CliError::Io { .. } => "io",
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            _ => 1,
        }
    }

    /// Machine-readable report written to stderr by the binary.
    pub fn to_json(&self) -> String {
        json!({ "error": { "kind": self.kind(), "message": self.to_string() } }).to_string()
    }

    pub(crate) fn stage(stage: &'static str, err: impl std::fmt::Display) -> Self {
        CliError::Stage { stage, message: err.to_string() }
    }
}
