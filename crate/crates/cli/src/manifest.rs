use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde_json::{json, Map, Value};
use sha2::{Digest, Sha256};

use polyg2p::RunConfig;

pub fn sha256_file(path: &Path) -> Result<String> {
    let bytes = fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(Sha256::digest(&bytes).iter().map(|b| format!("{b:02x}")).collect())
}

/// Config snapshot, input hashes and tool version. Contains no timestamps,
/// so identical runs write identical manifests.
pub struct Manifest {
    pub command: String,
    pub config: RunConfig,
    pub inputs: Vec<PathBuf>,
    pub outputs: Vec<PathBuf>,
}

impl Manifest {
    pub fn to_json(&self) -> Result<Value> {
        let mut config = Map::new();
        for line in self.config.to_text().lines() {
            if let Some((k, v)) = line.split_once(" = ") {
                config.insert(k.to_string(), Value::String(v.to_string()));
            }
        }
        let mut inputs = Map::new();
        for p in &self.inputs {
            inputs.insert(p.display().to_string(), Value::String(sha256_file(p)?));
        }
        let mut outputs = Map::new();
        for p in &self.outputs {
            outputs.insert(p.display().to_string(), Value::String(sha256_file(p)?));
        }
        Ok(json!({
            "tool": "polyg2p",
            "version": env!("CARGO_PKG_VERSION"),
            "command": self.command,
            "config": config,
            "inputs": inputs,
            "outputs": outputs,
        }))
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(&self.to_json()?)? + "\n";
        fs::write(path, text).with_context(|| format!("writing {}", path.display()))
    }
}

/// Recovers the `key = value` config text from a manifest.
pub fn config_text_from_manifest(text: &str) -> Result<String> {
    let v: Value = serde_json::from_str(text).context("parsing manifest JSON")?;
    let obj = v
        .get("config")
        .and_then(Value::as_object)
        .context("manifest has no config object")?;
    Ok(obj
        .iter()
        .map(|(k, v)| format!("{k} = {}\n", v.as_str().unwrap_or_default()))
        .collect())
}
