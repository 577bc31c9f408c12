use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{Context, Result};
use serde::Serialize;
use sha2::{Digest, Sha256};

#[derive(Debug, Serialize)]
pub struct FileDigest {
    pub path: PathBuf,
    pub sha256: String,
}

/// Record of one command run, written next to its outputs.
#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub version: &'static str,
    /// SHA-256 of the effective configuration as JSON.
    pub config_hash: String,
    pub config: serde_json::Value,
    pub seed: Option<u64>,
    pub inputs: Vec<FileDigest>,
    pub outputs: Vec<FileDigest>,
    pub wall_clock_s: f64,
    pub converged: Vec<bool>,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

fn digest(path: &Path) -> Result<FileDigest> {
    let bytes = std::fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(FileDigest { path: path.to_path_buf(), sha256: sha256_hex(&bytes) })
}

pub struct Recorder {
    command: String,
    config: serde_json::Value,
    seed: Option<u64>,
    inputs: Vec<PathBuf>,
    start: Instant,
    pub converged: Vec<bool>,
}

impl Recorder {
    pub fn new<C: Serialize>(command: &str, config: &C, seed: Option<u64>, inputs: &[&Path]) -> Result<Recorder> {
        Ok(Recorder {
            command: command.to_string(),
            config: serde_json::to_value(config)?,
            seed,
            inputs: inputs.iter().map(|p| p.to_path_buf()).collect(),
            start: Instant::now(),
            converged: Vec::new(),
        })
    }

    /// Writes the manifest to `path`.
    pub fn finish(self, outputs: &[&Path], path: &Path) -> Result<()> {
        let config_text = serde_json::to_string(&self.config)?;
        let manifest = RunManifest {
            command: self.command,
            version: env!("CARGO_PKG_VERSION"),
            config_hash: sha256_hex(config_text.as_bytes()),
            config: self.config,
            seed: self.seed,
            inputs: self.inputs.iter().map(|p| digest(p)).collect::<Result<_>>()?,
            outputs: outputs.iter().map(|p| digest(p)).collect::<Result<_>>()?,
            wall_clock_s: self.start.elapsed().as_secs_f64(),
            converged: self.converged,
        };
        let mut text = serde_json::to_string_pretty(&manifest)?;
        text.push('\n');
        std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))?;
        Ok(())
    }
}

/// `<file>.manifest.json` next to a single-file output.
pub fn sibling(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".manifest.json");
    PathBuf::from(s)
}
