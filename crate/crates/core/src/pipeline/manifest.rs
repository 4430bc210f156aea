//! Per-stage run manifests. A manifest records what a stage read, what it
//! wrote, and a hash chaining its configuration to every upstream stage's,
//! so a consumer can tell whether artifacts came from one configuration.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::Read;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub stage: String,
    pub tool_version: String,
    pub config_hash: String,
    pub upstream_config_hash: Option<String>,
    pub seed: u64,
    /// The settings that feed `config_hash`.
    pub stage_config: Value,
    /// Full run configuration, minus file locations.
    pub config: Value,
    pub backends: BTreeMap<String, String>,
    /// sha256 of each file read, keyed by name.
    pub inputs: BTreeMap<String, String>,
    /// sha256 of each file written, keyed by name relative to the output dir.
    pub outputs: BTreeMap<String, String>,
}

impl Manifest {
    pub fn file_name(stage: &str) -> String {
        format!("manifest.{stage}.json")
    }

    pub fn write(&self, dir: &Path) -> Result<()> {
        let path = dir.join(Self::file_name(&self.stage));
        let text = serde_json::to_string_pretty(self)? + "\n";
        std::fs::write(&path, text).map_err(|e| Error::io(&path, e))
    }

    pub fn read(dir: &Path, stage: &'static str) -> Result<Self> {
        let path = dir.join(Self::file_name(stage));
        if !path.exists() {
            return Err(Error::MissingArtifact { path, stage });
        }
        let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        Ok(serde_json::from_str(&text)?)
    }
}

pub fn sha256_bytes(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn sha256_file(path: &Path) -> Result<String> {
    let mut file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut hasher = Sha256::new();
    let mut buf = vec![0u8; 1 << 16];
    loop {
        let n = file.read(&mut buf).map_err(|e| Error::io(path, e))?;
        if n == 0 {
            break;
        }
        hasher.update(&buf[..n]);
    }
    Ok(hex::encode(hasher.finalize()))
}

/// `sha256(upstream || stage || json(stage_config))`.
pub fn chain_hash(upstream: Option<&str>, stage: &str, stage_config: &Value) -> String {
    let mut h = Sha256::new();
    h.update(upstream.unwrap_or("").as_bytes());
    h.update(b"\n");
    h.update(stage.as_bytes());
    h.update(b"\n");
    h.update(stage_config.to_string().as_bytes());
    hex::encode(h.finalize())
}
