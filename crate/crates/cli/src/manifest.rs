//! Run manifests: every command writes one alongside its artifacts, recording
//! the resolved flags, the seed, a digest of the input CSV bytes and the
//! artifact paths. `wall_clock_ms` is the only non-deterministic field.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;

use crate::errors::CliError;

#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub flags: BTreeMap<String, serde_json::Value>,
    pub seed: u64,
    /// FNV-1a 64-bit hash of the newline-canonicalized CSV bytes, hex-coded;
    /// absent for commands that generate their own data.
    pub dataset_digest: Option<String>,
    pub artifacts: Vec<String>,
    pub wall_clock_ms: u128,
}

pub struct ManifestBuilder {
    command: String,
    flags: BTreeMap<String, serde_json::Value>,
    seed: u64,
    dataset_digest: Option<String>,
    artifacts: Vec<String>,
    started: Instant,
}

impl ManifestBuilder {
    pub fn new(command: &str, seed: u64) -> Self {
        ManifestBuilder {
            command: command.to_string(),
            flags: BTreeMap::new(),
            seed,
            dataset_digest: None,
            artifacts: Vec::new(),
            started: Instant::now(),
        }
    }

    pub fn flag<V: Serialize>(&mut self, name: &str, value: V) -> &mut Self {
        self.flags.insert(
            name.to_string(),
            serde_json::to_value(value).expect("flag values serialize"),
        );
        self
    }

    pub fn dataset<P: AsRef<Path>>(&mut self, path: P) -> Result<&mut Self, CliError> {
        let bytes = std::fs::read(&path)?;
        self.dataset_digest = Some(format!("{:016x}", fnv1a64(&canonicalize_newlines(&bytes))));
        Ok(self)
    }

    /// Writes `content` into `out_dir/name` and records the artifact.
    pub fn write_artifact(
        &mut self,
        out_dir: &Path,
        name: &str,
        content: &str,
    ) -> Result<PathBuf, CliError> {
        std::fs::create_dir_all(out_dir)?;
        let path = out_dir.join(name);
        std::fs::write(&path, content)?;
        self.artifacts.push(path.display().to_string());
        Ok(path)
    }

    /// Finalizes and writes `manifest.json`.
    pub fn finish(mut self, out_dir: &Path) -> Result<PathBuf, CliError> {
        std::fs::create_dir_all(out_dir)?;
        let path = out_dir.join("manifest.json");
        self.artifacts.push(path.display().to_string());
        let manifest = RunManifest {
            command: self.command,
            flags: self.flags,
            seed: self.seed,
            dataset_digest: self.dataset_digest,
            artifacts: self.artifacts,
            wall_clock_ms: self.started.elapsed().as_millis(),
        };
        let json = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
        std::fs::write(&path, json)?;
        Ok(path)
    }
}

/// `\r\n` and bare `\r` both become `\n`.
pub fn canonicalize_newlines(bytes: &[u8]) -> Vec<u8> {
    let mut out = Vec::with_capacity(bytes.len());
    let mut i = 0;
    while i < bytes.len() {
        match bytes[i] {
            b'\r' => {
                out.push(b'\n');
                if i + 1 < bytes.len() && bytes[i + 1] == b'\n' {
                    i += 1;
                }
            }
            b => out.push(b),
        }
        i += 1;
    }
    out
}

pub fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut hash: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        hash ^= b as u64;
        hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
    }
    hash
}
