//! Experiment configuration, read from TOML.
//!
//! Every section is optional; missing keys take the defaults of the
//! reference setup, so an empty file is a complete configuration.

use std::path::Path;

use lfrelay_core::{QuadratureConfig, SystemModel};
use lfrelay_rl::{DdpgConfig, EnvConfig, SacConfig, TrainConfig};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{CliError, CliResult};

pub const CONFIG_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentSection {
    /// Seeds for multi-seed commands; single-run commands use the first.
    pub seeds: Vec<u64>,
    /// Distortion pairs swept by `compare`.
    pub d_pairs: Vec<Vec<f64>>,
    /// Points per axis of the grid-search lattice.
    pub grid_n: usize,
    /// Quadrature used for rewards during training.
    pub training_quadrature: QuadratureConfig,
    /// Replace per-step quadrature with a precomputed bilinear map.
    pub outage_cache: bool,
    pub cache_n: usize,
    pub output_dir: Option<String>,
}

impl Default for ExperimentSection {
    fn default() -> Self {
        ExperimentSection {
            seeds: vec![1, 2, 3],
            d_pairs: vec![vec![0.2, 0.2], vec![0.1, 0.3]],
            grid_n: 41,
            training_quadrature: QuadratureConfig::relaxed(),
            outage_cache: false,
            cache_n: 201,
            output_dir: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ValidateSection {
    pub geometries: usize,
    pub samples: u64,
    pub workers: u32,
    /// Largest tolerated |z| before `validate` reports a violation.
    pub z_fail: f64,
}

impl Default for ValidateSection {
    fn default() -> Self {
        ValidateSection {
            geometries: 20,
            samples: 1_000_000,
            workers: 8,
            z_fail: 4.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub version: u32,
    pub system: SystemModel,
    pub env: EnvConfig,
    pub sac: SacConfig,
    pub ddpg: DdpgConfig,
    pub train: TrainConfig,
    pub experiment: ExperimentSection,
    pub validate: ValidateSection,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            version: CONFIG_VERSION,
            system: SystemModel::default(),
            env: EnvConfig::default(),
            sac: SacConfig::default(),
            ddpg: DdpgConfig::default(),
            train: TrainConfig::default(),
            experiment: ExperimentSection::default(),
            validate: ValidateSection::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> CliResult<Self> {
        let cfg: ExperimentConfig = toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> CliResult<String> {
        toml::to_string_pretty(self).map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn validate(&self) -> CliResult<()> {
        let bad = |m: String| Err(CliError::Config(m));
        if self.version != CONFIG_VERSION {
            return bad(format!(
                "unsupported config version {} (expected {CONFIG_VERSION})",
                self.version
            ));
        }
        self.system.validate().map_err(|e| CliError::Config(e.to_string()))?;
        self.env.validate().map_err(|e| CliError::Config(e.to_string()))?;
        self.sac.validate().map_err(|e| CliError::Config(e.to_string()))?;
        self.ddpg.validate().map_err(|e| CliError::Config(e.to_string()))?;
        self.experiment
            .training_quadrature
            .validate()
            .map_err(|e| CliError::Config(e.to_string()))?;
        if self.system.uav_altitude != self.env.altitude {
            return bad(format!(
                "system.uav_altitude ({}) and env.altitude ({}) disagree",
                self.system.uav_altitude, self.env.altitude
            ));
        }
        if self.train.episodes == 0 {
            return bad("train.episodes must be at least 1".into());
        }
        if let Some(s) = self.train.start {
            if !self.env.area.contains(s) {
                return bad(format!("train.start ({}, {}) is outside env.area", s.n1, s.n2));
            }
        }
        let e = &self.experiment;
        if e.seeds.is_empty() {
            return bad("experiment.seeds must not be empty".into());
        }
        if e.grid_n < 2 || e.cache_n < 2 {
            return bad("grid sizes must be at least 2".into());
        }
        let k = self.system.num_users();
        for p in &e.d_pairs {
            if p.len() != k {
                return bad(format!("distortion set {p:?} has {} entries for {k} users", p.len()));
            }
            if p.iter().any(|d| !(0.0..=0.5).contains(d)) {
                return bad(format!("distortion set {p:?} must lie in [0, 0.5]"));
            }
        }
        let v = &self.validate;
        if v.geometries == 0 || v.samples == 0 || v.workers == 0 || !(v.z_fail > 0.0) {
            return bad("validate section needs positive geometries, samples, workers and z_fail".into());
        }
        Ok(())
    }

    /// Hex SHA-256 of the canonical JSON encoding.
    pub fn hash(&self) -> String {
        let bytes = serde_json::to_vec(self).expect("config serializes");
        hex(&Sha256::digest(&bytes))
    }

    /// The system model with its distortion targets replaced by `d`.
    pub fn system_with(&self, d: Option<&[f64]>) -> CliResult<SystemModel> {
        match d {
            None => Ok(self.system.clone()),
            Some(d) => {
                if d.len() != self.system.num_users() {
                    return Err(CliError::Config(format!(
                        "{} distortions for {} users",
                        d.len(),
                        self.system.num_users()
                    )));
                }
                self.system
                    .clone()
                    .with_distortions(d)
                    .map_err(|e| CliError::Config(e.to_string()))
            }
        }
    }
}

pub fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}
