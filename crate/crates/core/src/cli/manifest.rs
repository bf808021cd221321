use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

pub const MANIFEST_SCHEMA: u32 = 1;
pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Artifact {
    /// Relative to the manifest's directory.
    pub path: String,
    pub sha256: String,
    pub bytes: u64,
    /// False for files carrying wall-clock measurements.
    pub deterministic: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Timing {
    pub stage: String,
    pub seconds: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ErrorRecord {
    pub kind: String,
    pub message: String,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Ok,
    Shortfall,
    Failed,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub schema_version: u32,
    pub command: String,
    pub library_version: String,
    pub config_hash: String,
    /// The resolved configuration, defaults included.
    pub config: serde_json::Value,
    pub artifacts: Vec<Artifact>,
    pub timings: Vec<Timing>,
    pub status: Status,
    pub error: Option<ErrorRecord>,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn error_kind(e: &Error) -> &'static str {
    match e {
        Error::InvalidArgument(_) => "invalid_argument",
        Error::BudgetInfeasible { .. } => "budget_infeasible",
        Error::BudgetOverflow { .. } => "budget_overflow",
        Error::TrainingDiverged { .. } => "training_diverged",
        Error::PackingInfeasible { .. } => "packing_infeasible",
        Error::OracleDiverged { .. } => "oracle_diverged",
        Error::Unsupported(_) => "unsupported",
        Error::Integrity { .. } => "integrity",
        Error::Config { .. } => "config",
        Error::Io { .. } => "io",
        Error::Format(_) => "format",
    }
}

/// Collects artifacts written under one directory.
#[derive(Debug)]
pub struct ArtifactWriter {
    dir: PathBuf,
    artifacts: Vec<Artifact>,
}

impl ArtifactWriter {
    pub fn new(dir: &Path) -> Result<Self> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        Ok(Self { dir: dir.to_path_buf(), artifacts: Vec::new() })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn write(&mut self, rel: &str, bytes: &[u8], deterministic: bool) -> Result<PathBuf> {
        let path = self.dir.join(rel);
        if let Some(parent) = path.parent() {
            std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
        }
        std::fs::write(&path, bytes).map_err(|e| Error::io(&path, e))?;
        self.artifacts.retain(|a| a.path != rel);
        self.artifacts.push(Artifact {
            path: rel.to_string(),
            sha256: sha256_hex(bytes),
            bytes: bytes.len() as u64,
            deterministic,
        });
        Ok(path)
    }

    pub fn write_json<T: Serialize>(&mut self, rel: &str, value: &T) -> Result<PathBuf> {
        let mut text = serde_json::to_string_pretty(value).map_err(|e| Error::Format(e.to_string()))?;
        text.push('\n');
        self.write(rel, text.as_bytes(), true)
    }

    pub fn into_artifacts(self) -> Vec<Artifact> {
        self.artifacts
    }
}

impl RunManifest {
    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let m: RunManifest = serde_json::from_str(&text).map_err(|e| Error::Integrity {
            path: path.display().to_string(),
            detail: e.to_string(),
        })?;
        if m.schema_version != MANIFEST_SCHEMA {
            return Err(Error::Integrity {
                path: path.display().to_string(),
                detail: format!("unknown manifest schema version {}", m.schema_version),
            });
        }
        Ok(m)
    }

    /// Rehashes every listed artifact relative to `dir`.
    pub fn verify(&self, dir: &Path) -> Result<()> {
        for a in &self.artifacts {
            let path = dir.join(&a.path);
            let bytes = std::fs::read(&path).map_err(|e| Error::Integrity {
                path: path.display().to_string(),
                detail: e.to_string(),
            })?;
            let got = sha256_hex(&bytes);
            if got != a.sha256 {
                return Err(Error::Integrity {
                    path: path.display().to_string(),
                    detail: format!("sha256 {got} does not match recorded {}", a.sha256),
                });
            }
        }
        Ok(())
    }
}
