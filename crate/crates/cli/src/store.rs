use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::CliError;

pub const MANIFEST: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ArtifactEntry {
    pub config_hash: String,
    pub stage: String,
}

/// Which config produced each artifact, keyed by path relative to the run directory.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Manifest {
    pub artifacts: BTreeMap<String, ArtifactEntry>,
}

impl Manifest {
    /// Distinct hashes other than `hash`, sorted.
    pub fn foreign_hashes(&self, hash: &str) -> Vec<String> {
        let mut found: Vec<String> =
            self.artifacts.values().filter(|e| e.config_hash != hash).map(|e| e.config_hash.clone()).collect();
        found.sort();
        found.dedup();
        found
    }
}

/// A run directory bound to one config hash.
#[derive(Debug)]
pub struct RunDir {
    root: PathBuf,
    hash: String,
    force: bool,
    manifest: Manifest,
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
    move |source| CliError::Io { path: path.to_path_buf(), source }
}

impl RunDir {
    pub fn open(root: &Path, hash: String, force: bool) -> Result<Self, CliError> {
        std::fs::create_dir_all(root).map_err(io_err(root))?;
        let path = root.join(MANIFEST);
        let manifest = if path.exists() {
            let text = std::fs::read_to_string(&path).map_err(io_err(&path))?;
            serde_json::from_str(&text)
                .map_err(|e| CliError::MalformedArtifact { path: path.clone(), reason: e.to_string() })?
        } else {
            Manifest::default()
        };
        Ok(Self { root: root.to_path_buf(), hash, force, manifest })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn hash(&self) -> &str {
        &self.hash
    }

    pub fn manifest(&self) -> &Manifest {
        &self.manifest
    }

    pub fn path(&self, rel: &str) -> PathBuf {
        self.root.join(rel)
    }

    /// Refuse to start a full run over another config's artifacts unless forced.
    pub fn claim(&mut self) -> Result<(), CliError> {
        let found = self.manifest.foreign_hashes(&self.hash);
        if found.is_empty() {
            return Ok(());
        }
        if !self.force {
            return Err(CliError::MixedArtifacts { found, expected: self.hash.clone() });
        }
        log::warn!("discarding manifest entries from {} other config(s)", found.len());
        let hash = self.hash.clone();
        self.manifest.artifacts.retain(|_, e| e.config_hash == hash);
        self.save_manifest()
    }

    fn save_manifest(&self) -> Result<(), CliError> {
        let path = self.path(MANIFEST);
        let text = serde_json::to_string_pretty(&self.manifest).expect("manifest serializes");
        std::fs::write(&path, text + "\n").map_err(io_err(&path))
    }

    pub fn write(&mut self, stage: &str, rel: &str, bytes: &[u8]) -> Result<(), CliError> {
        let path = self.path(rel);
        if let Some(parent) = path.parent() {
            std::fs::create_dir_all(parent).map_err(io_err(parent))?;
        }
        std::fs::write(&path, bytes).map_err(io_err(&path))?;
        log::debug!("wrote {}", path.display());
        self.manifest
            .artifacts
            .insert(rel.to_string(), ArtifactEntry { config_hash: self.hash.clone(), stage: stage.to_string() });
        self.save_manifest()
    }

    pub fn write_json<T: Serialize>(&mut self, stage: &str, rel: &str, value: &T) -> Result<(), CliError> {
        let text = serde_json::to_string_pretty(value).expect("artifacts serialize");
        self.write(stage, rel, (text + "\n").as_bytes())
    }

    /// Path of an upstream artifact, checked for existence and provenance.
    pub fn require(&self, what: &'static str, rel: &str) -> Result<PathBuf, CliError> {
        let path = self.path(rel);
        if !path.exists() {
            return Err(CliError::MissingArtifact { what, path });
        }
        if self.force {
            return Ok(path);
        }
        match self.manifest.artifacts.get(rel) {
            Some(e) if e.config_hash == self.hash => Ok(path),
            Some(e) => Err(CliError::StaleArtifact { path, found: e.config_hash.clone(), expected: self.hash.clone() }),
            None => Err(CliError::StaleArtifact { path, found: "unrecorded".into(), expected: self.hash.clone() }),
        }
    }

    pub fn read_text(&self, what: &'static str, rel: &str) -> Result<String, CliError> {
        let path = self.require(what, rel)?;
        std::fs::read_to_string(&path).map_err(io_err(&path))
    }

    pub fn read_json<T: DeserializeOwned>(&self, what: &'static str, rel: &str) -> Result<T, CliError> {
        let text = self.read_text(what, rel)?;
        serde_json::from_str(&text)
            .map_err(|e| CliError::MalformedArtifact { path: self.path(rel), reason: e.to_string() })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_and_provenance() {
        let dir = tempfile::tempdir().unwrap();
        let mut a = RunDir::open(dir.path(), "aaa".into(), false).unwrap();
        a.write_json("split", "x/y.json", &[1, 2, 3]).unwrap();
        let v: Vec<i32> = a.read_json("split", "x/y.json").unwrap();
        assert_eq!(v, [1, 2, 3]);

        let b = RunDir::open(dir.path(), "bbb".into(), false).unwrap();
        assert!(matches!(b.read_json::<Vec<i32>>("split", "x/y.json"), Err(CliError::StaleArtifact { .. })));
        assert!(matches!(b.require("model", "nope.json"), Err(CliError::MissingArtifact { .. })));
        let forced = RunDir::open(dir.path(), "bbb".into(), true).unwrap();
        assert!(forced.require("split", "x/y.json").is_ok());
    }

    #[test]
    fn claim_refuses_foreign_hashes_unless_forced() {
        let dir = tempfile::tempdir().unwrap();
        RunDir::open(dir.path(), "aaa".into(), false).unwrap().write("s", "f.txt", b"1").unwrap();
        let mut b = RunDir::open(dir.path(), "bbb".into(), false).unwrap();
        assert!(matches!(b.claim(), Err(CliError::MixedArtifacts { .. })));
        let mut b = RunDir::open(dir.path(), "bbb".into(), true).unwrap();
        b.claim().unwrap();
        assert!(b.manifest().artifacts.is_empty());
        RunDir::open(dir.path(), "aaa".into(), false).unwrap().claim().unwrap();
    }
}
