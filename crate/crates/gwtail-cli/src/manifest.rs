//! Run manifest written alongside every output.

use anyhow::{Context, Result};
use serde::Serialize;
use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub model_config_path: String,
    pub parameters: BTreeMap<String, String>,
    pub outputs: Vec<String>,
    pub seed: u64,
    pub tool_version: String,
}

impl RunManifest {
    pub fn new(command: &str, model_path: &Path, seed: u64) -> Self {
        RunManifest {
            command: command.to_string(),
            model_config_path: model_path.display().to_string(),
            parameters: BTreeMap::new(),
            outputs: Vec::new(),
            seed,
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
        }
    }

    pub fn param(&mut self, key: &str, value: impl ToString) -> &mut Self {
        self.parameters.insert(key.to_string(), value.to_string());
        self
    }

    pub fn output(&mut self, path: &Path) {
        self.outputs.push(path.display().to_string());
    }

    /// Serializes next to the outputs as `manifest.json`.
    pub fn write(&self, out_dir: &Path) -> Result<PathBuf> {
        let path = out_dir.join("manifest.json");
        let body = serde_json::to_string_pretty(self)?;
        std::fs::write(&path, body)
            .with_context(|| format!("cannot write manifest {}", path.display()))?;
        Ok(path)
    }
}
