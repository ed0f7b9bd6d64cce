use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use modgae::graph::Graph;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub const FILE: &str = "manifest.json";

/// Record of one command invocation, written into its output directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub config: serde_json::Value,
    /// SHA-256 of the canonical edge list the command consumed.
    pub dataset_fingerprint: Option<String>,
    pub seeds: Vec<u64>,
    /// Input paths, as given on the command line.
    pub inputs: serde_json::Value,
    /// Files written, relative to the output directory.
    pub artifacts: Vec<String>,
    pub tool_version: String,
}

impl RunManifest {
    pub fn new(command: &str) -> RunManifest {
        RunManifest {
            command: command.to_string(),
            config: serde_json::Value::Null,
            dataset_fingerprint: None,
            seeds: Vec::new(),
            inputs: serde_json::Value::Null,
            artifacts: Vec::new(),
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
        }
    }

    pub fn write(&self, dir: &Path) -> Result<()> {
        let path = dir.join(FILE);
        fs::write(&path, serde_json::to_string_pretty(self)? + "\n")
            .with_context(|| format!("writing {}", path.display()))
    }

    pub fn read(dir: &Path) -> Result<RunManifest> {
        let path = dir.join(FILE);
        let text =
            fs::read_to_string(&path).with_context(|| format!("reading {}", path.display()))?;
        serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
    }

    /// Input path recorded under `key`, if any.
    pub fn input(&self, key: &str) -> Option<PathBuf> {
        self.inputs.get(key)?.as_str().map(PathBuf::from)
    }
}

pub fn fingerprint(g: &Graph) -> String {
    hex::encode(Sha256::digest(g.to_edge_list_string().as_bytes()))
}

/// Absolute form of a path for recording, falling back to the path as given.
pub fn absolute(p: &Path) -> String {
    std::path::absolute(p)
        .unwrap_or_else(|_| p.to_path_buf())
        .display()
        .to_string()
}
