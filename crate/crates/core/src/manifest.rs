//! Run manifests: what went in, what came out, and their digests.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::io::{file_digest, read_json, write_json};

pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub config: serde_json::Value,
    /// Path -> sha256.
    pub inputs: BTreeMap<String, String>,
    pub outputs: BTreeMap<String, String>,
    pub started_at: String,
    pub finished_at: String,
}

impl RunManifest {
    pub fn new(command: &str, config: serde_json::Value, started_at: String) -> Self {
        RunManifest {
            tool: "rcprobe".into(),
            version: env!("CARGO_PKG_VERSION").into(),
            command: command.into(),
            config,
            inputs: BTreeMap::new(),
            outputs: BTreeMap::new(),
            started_at,
            finished_at: String::new(),
        }
    }

    pub fn add_input(&mut self, path: &Path) -> Result<()> {
        self.inputs
            .insert(path.display().to_string(), file_digest(path)?);
        Ok(())
    }

    pub fn add_output(&mut self, path: &Path) -> Result<()> {
        self.outputs
            .insert(path.display().to_string(), file_digest(path)?);
        Ok(())
    }

    pub fn write(&self, dir: &Path) -> Result<PathBuf> {
        let path = dir.join(MANIFEST_FILE);
        write_json(&path, self)?;
        Ok(path)
    }

    pub fn read(dir: &Path) -> Result<Self> {
        read_json(&dir.join(MANIFEST_FILE))
    }

    /// Recorded inputs and outputs whose current digest differs, or that
    /// no longer exist.
    pub fn drifted(&self) -> Vec<String> {
        self.inputs
            .iter()
            .chain(&self.outputs)
            .filter(|(path, digest)| {
                file_digest(Path::new(path)).map_or(true, |d| &d != *digest)
            })
            .map(|(p, _)| p.clone())
            .collect()
    }
}

/// Checks the manifest stored next to an artifact, if any, and returns the
/// paths that changed since it was written.
pub fn stale_dependencies(artifact_dir: &Path) -> Vec<String> {
    match RunManifest::read(artifact_dir) {
        Ok(m) => m.drifted(),
        Err(_) => Vec::new(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn drift_is_detected() {
        let dir = tempfile::tempdir().unwrap();
        let input = dir.path().join("in.txt");
        std::fs::write(&input, "a\n").unwrap();
        let mut m = RunManifest::new("build-dataset", serde_json::json!({}), "t0".into());
        m.add_input(&input).unwrap();
        m.write(dir.path()).unwrap();
        assert!(stale_dependencies(dir.path()).is_empty());
        std::fs::write(&input, "b\n").unwrap();
        assert_eq!(stale_dependencies(dir.path()), vec![input.display().to_string()]);
    }
}
