//! Run manifests: what a command read, what it wrote and every seed it used.
//!
//! Manifests carry no timestamps, so rerunning a command from its manifest
//! reproduces the manifest byte for byte along with the outputs.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::config::PipelineConfig;
use crate::error::Result;
use crate::io;

pub const MANIFEST_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileDigest {
    /// Relative to the run's output directory when it lies inside it.
    pub path: String,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub manifest_version: u32,
    pub command: String,
    pub tool_version: String,
    pub config_hash: String,
    pub config: PipelineConfig,
    pub seeds: BTreeMap<String, u64>,
    /// Derived per-item seeds (scenarios, bootstrap samples, clusters).
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub derived_seeds: BTreeMap<String, Vec<u64>>,
    pub inputs: Vec<FileDigest>,
    pub outputs: Vec<FileDigest>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

impl Manifest {
    pub fn new(command: &str, config: &PipelineConfig) -> Self {
        let s = config.seeds();
        let seeds = BTreeMap::from([
            ("master".to_string(), s.master),
            ("fit".to_string(), s.fit),
            ("generate".to_string(), s.generate),
            ("evaluate".to_string(), s.evaluate),
            ("bootstrap".to_string(), s.bootstrap),
            ("regurgitate".to_string(), s.regurgitate),
            ("biaslab".to_string(), s.biaslab),
        ]);
        Self {
            manifest_version: MANIFEST_VERSION,
            command: command.to_string(),
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            config_hash: config.hash(),
            config: config.clone(),
            seeds,
            derived_seeds: BTreeMap::new(),
            inputs: Vec::new(),
            outputs: Vec::new(),
            warnings: Vec::new(),
        }
    }

    pub fn input(&mut self, root: &Path, path: &Path) -> Result<()> {
        self.inputs.push(digest(root, path)?);
        Ok(())
    }

    /// Writes `bytes` to `root/rel` and records its digest.
    pub fn emit(&mut self, root: &Path, rel: &str, bytes: &[u8]) -> Result<PathBuf> {
        let path = root.join(rel);
        io::write_bytes(&path, bytes)?;
        self.outputs.push(FileDigest { path: rel.to_string(), sha256: io::sha256_hex(bytes) });
        Ok(path)
    }

    pub fn warn(&mut self, msg: String) {
        eprintln!("warning: {msg}");
        self.warnings.push(msg);
    }

    pub fn write(&self, root: &Path, rel: &str) -> Result<PathBuf> {
        let path = root.join(rel);
        io::write_json(&path, self)?;
        Ok(path)
    }

    pub fn output_hash(&self, rel: &str) -> Option<&str> {
        self.outputs.iter().find(|f| f.path == rel).map(|f| f.sha256.as_str())
    }
}

fn digest(root: &Path, path: &Path) -> Result<FileDigest> {
    let sha256 = io::sha256_file(path)?;
    let shown = path.strip_prefix(root).unwrap_or(path);
    Ok(FileDigest { path: shown.display().to_string(), sha256 })
}
