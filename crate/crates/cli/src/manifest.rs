use std::path::Path;

use hiercal::config::ExperimentConfig;
use hiercal::Result;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Versions {
    pub hiercal: String,
    pub parallel: bool,
}

/// Everything needed to rerun a command and get the same files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub command: String,
    pub config_sha256: String,
    pub config: ExperimentConfig,
    pub seeds: Vec<u64>,
    pub t_obs: Vec<usize>,
    pub versions: Versions,
    /// Code runs (surrogate or simulator calls) made by the command.
    pub evaluations: u64,
    pub outputs: Vec<String>,
}

pub fn config_hash(cfg: &ExperimentConfig) -> String {
    Sha256::digest(cfg.to_toml_string().as_bytes())
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

impl Manifest {
    pub fn new(command: &str, cfg: &ExperimentConfig, evaluations: u64, outputs: Vec<String>) -> Self {
        Self {
            command: command.to_string(),
            config_sha256: config_hash(cfg),
            config: cfg.clone(),
            seeds: cfg.testbed.seeds.clone(),
            t_obs: cfg.testbed.t_obs.clone(),
            versions: Versions {
                hiercal: env!("CARGO_PKG_VERSION").to_string(),
                parallel: hiercal::par::is_parallel(),
            },
            evaluations,
            outputs,
        }
    }

    pub fn write(&self, dir: &Path) -> Result<()> {
        hiercal::io::write_json(&dir.join(format!("manifest-{}.json", self.command)), self)
    }
}
