//! Run manifests: enough to re-execute a run and check its outputs.

use std::path::Path;
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::{hex, ExperimentConfig};
use crate::error::{CliError, CliResult};
use crate::run::RunSpec;

pub const MANIFEST_FORMAT: &str = "lfrelay-manifest";
pub const MANIFEST_VERSION: u32 = 1;
pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunStatus {
    Running,
    Complete,
    Failed,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputFile {
    pub file: String,
    pub bytes: u64,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunManifest {
    pub format: String,
    pub manifest_version: u32,
    pub code_version: String,
    pub run: RunSpec,
    pub seeds: Vec<u64>,
    pub config_hash: String,
    pub config: ExperimentConfig,
    pub started_unix: u64,
    pub finished_unix: Option<u64>,
    pub status: RunStatus,
    pub outputs: Vec<OutputFile>,
}

fn now() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0)
}

pub fn file_digest(path: &Path) -> CliResult<OutputFile> {
    let bytes = std::fs::read(path).map_err(|e| CliError::io(path, e))?;
    Ok(OutputFile {
        file: path
            .file_name()
            .map(|n| n.to_string_lossy().into_owned())
            .unwrap_or_default(),
        bytes: bytes.len() as u64,
        sha256: hex(&Sha256::digest(&bytes)),
    })
}

impl RunManifest {
    pub fn begin(run: RunSpec, config: &ExperimentConfig, seeds: Vec<u64>) -> Self {
        RunManifest {
            format: MANIFEST_FORMAT.into(),
            manifest_version: MANIFEST_VERSION,
            code_version: env!("CARGO_PKG_VERSION").into(),
            run,
            seeds,
            config_hash: config.hash(),
            config: config.clone(),
            started_unix: now(),
            finished_unix: None,
            status: RunStatus::Running,
            outputs: Vec::new(),
        }
    }

    pub fn finish(&mut self, dir: &Path, files: &[String], status: RunStatus) -> CliResult<()> {
        self.outputs = files
            .iter()
            .map(|f| file_digest(&dir.join(f)))
            .collect::<CliResult<_>>()?;
        self.finished_unix = Some(now());
        self.status = status;
        Ok(())
    }

    pub fn write(&self, dir: &Path) -> CliResult<()> {
        let path = dir.join(MANIFEST_FILE);
        let text = serde_json::to_string_pretty(self).map_err(|e| CliError::Manifest(e.to_string()))?;
        std::fs::write(&path, text + "\n").map_err(|e| CliError::io(&path, e))
    }

    pub fn from_slice(bytes: &[u8]) -> CliResult<Self> {
        let m: RunManifest = serde_json::from_slice(bytes).map_err(|e| CliError::Manifest(e.to_string()))?;
        if m.format != MANIFEST_FORMAT {
            return Err(CliError::Manifest(format!("unexpected format {:?}", m.format)));
        }
        if m.manifest_version != MANIFEST_VERSION {
            return Err(CliError::Manifest(format!(
                "unsupported manifest version {}",
                m.manifest_version
            )));
        }
        m.config.validate()?;
        if m.config.hash() != m.config_hash {
            return Err(CliError::Manifest("embedded config does not match its hash".into()));
        }
        if m.seeds.is_empty() {
            return Err(CliError::Manifest("no seeds recorded".into()));
        }
        for o in &m.outputs {
            let plain = Path::new(&o.file)
                .file_name()
                .map(|n| n == o.file.as_str())
                .unwrap_or(false);
            if !plain {
                return Err(CliError::Manifest(format!(
                    "output {:?} is not a plain file name",
                    o.file
                )));
            }
        }
        Ok(m)
    }

    pub fn load(path: &Path) -> CliResult<Self> {
        let bytes = std::fs::read(path).map_err(|e| CliError::io(path, e))?;
        Self::from_slice(&bytes)
    }
}
