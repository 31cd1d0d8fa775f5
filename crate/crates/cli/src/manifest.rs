//! Output manifest: every command records its config hash, input digests and
//! the digests of the files it produced. Identical configs and seeds yield
//! identical output digests; only the wall time differs between runs.

use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::CliError;

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq, Eq)]
pub struct FileDigest {
    pub path: String,
    pub sha256: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OutputManifest {
    pub command: String,
    pub config_hash: String,
    pub inputs: Vec<FileDigest>,
    pub outputs: Vec<FileDigest>,
    pub wall_time_secs: f64,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    let mut hasher = Sha256::new();
    hasher.update(bytes);
    let out = hasher.finalize();
    out.iter().map(|b| format!("{b:02x}")).collect()
}

pub fn digest_file(path: &Path) -> Result<String, CliError> {
    let bytes = std::fs::read(path)
        .map_err(|e| CliError::Other(format!("cannot digest {}: {e}", path.display())))?;
    Ok(sha256_hex(&bytes))
}

/// Collects produced files and writes `manifest.json` at the end of a run.
pub struct ManifestBuilder {
    command: String,
    config_hash: String,
    out_dir: PathBuf,
    inputs: Vec<FileDigest>,
    outputs: Vec<PathBuf>,
    started: Instant,
}

impl ManifestBuilder {
    pub fn new(command: &str, config_json: &str, out_dir: &Path) -> Self {
        Self {
            command: command.to_string(),
            config_hash: sha256_hex(config_json.as_bytes()),
            out_dir: out_dir.to_path_buf(),
            inputs: Vec::new(),
            outputs: Vec::new(),
            started: Instant::now(),
        }
    }

    pub fn add_input(&mut self, path: &Path) -> Result<(), CliError> {
        self.inputs.push(FileDigest {
            path: path.display().to_string(),
            sha256: digest_file(path)?,
        });
        Ok(())
    }

    pub fn add_output(&mut self, path: impl Into<PathBuf>) {
        self.outputs.push(path.into());
    }

    pub fn finish(self) -> Result<OutputManifest, CliError> {
        let mut outputs = Vec::with_capacity(self.outputs.len());
        for path in &self.outputs {
            let rel = path
                .strip_prefix(&self.out_dir)
                .unwrap_or(path)
                .display()
                .to_string();
            outputs.push(FileDigest { path: rel, sha256: digest_file(path)? });
        }
        outputs.sort_by(|a, b| a.path.cmp(&b.path));
        let manifest = OutputManifest {
            command: self.command,
            config_hash: self.config_hash,
            inputs: self.inputs,
            outputs,
            wall_time_secs: self.started.elapsed().as_secs_f64(),
        };
        let text = serde_json::to_string_pretty(&manifest)
            .map_err(|e| CliError::Other(e.to_string()))?;
        std::fs::write(self.out_dir.join("manifest.json"), text + "\n")
            .map_err(|e| CliError::Other(e.to_string()))?;
        Ok(manifest)
    }
}
