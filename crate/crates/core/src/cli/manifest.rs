use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::config::RunConfig;
use super::CliError;
use crate::format::write_atomic;
use crate::schedule::NoiseSchedule;

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FileRecord {
    pub path: String,
    pub sha256: String,
    pub bytes: usize,
}

impl FileRecord {
    pub fn of(path: &Path, bytes: &[u8]) -> Self {
        Self { path: path.display().to_string(), sha256: sha256_hex(bytes), bytes: bytes.len() }
    }

    pub fn read(path: &Path) -> Result<Self, CliError> {
        let bytes = std::fs::read(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
        Ok(Self::of(path, &bytes))
    }
}

/// Everything needed to replay a run: the effective configuration after
/// flag overrides, the exact schedule, and content hashes of every file
/// read or written. No timestamps, so identical runs give identical bytes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub version: String,
    pub config_dir: String,
    pub config: RunConfig,
    pub schedule: NoiseSchedule,
    pub denoiser: String,
    pub text_dim: usize,
    pub inputs: BTreeMap<String, FileRecord>,
    pub outputs: BTreeMap<String, FileRecord>,
}

impl RunManifest {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("serializable")
    }
}

/// Files to write once every result is in memory.
#[derive(Default)]
pub(super) struct PendingWrites {
    files: Vec<(String, PathBuf, Vec<u8>)>,
}

impl PendingWrites {
    pub fn push(&mut self, role: impl Into<String>, path: PathBuf, bytes: Vec<u8>) {
        self.files.push((role.into(), path, bytes));
    }

    pub fn records(&self) -> BTreeMap<String, FileRecord> {
        self.files.iter().map(|(r, p, b)| (r.clone(), FileRecord::of(p, b))).collect()
    }

    pub fn commit(self) -> Result<(), CliError> {
        for (_, path, bytes) in &self.files {
            if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
                std::fs::create_dir_all(dir).map_err(|e| CliError::Io(format!("{}: {e}", dir.display())))?;
            }
            write_atomic(path, bytes).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
        }
        Ok(())
    }
}
