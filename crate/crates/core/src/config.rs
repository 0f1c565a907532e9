//! Run configuration file (TOML).
//!
//! ```toml
//! [noise]
//! p_miss = 0.2
//!
//! [scheduler]
//! max_iterations = 8
//!
//! [tools]
//! disabled = ["frame_selector"]
//! ```

use std::path::Path;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::protocol::DEFAULT_TIMEOUT;
use crate::scheduler::StrategyConfig;
use crate::sim::NoiseModel;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("{path}: {message}")]
    Parse { path: String, message: String },
    #[error("invalid configuration: {0}")]
    Invalid(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ToolsConfig {
    /// Cards removed from the registry before the run.
    pub disabled: Vec<String>,
    /// Tool server whose cards replace the simulators.
    pub remote_endpoint: Option<String>,
    pub remote_timeout_ms: u64,
}

impl Default for ToolsConfig {
    fn default() -> Self {
        Self { disabled: Vec::new(), remote_endpoint: None, remote_timeout_ms: DEFAULT_TIMEOUT.as_millis() as u64 }
    }
}

impl ToolsConfig {
    pub fn remote_timeout(&self) -> Duration {
        Duration::from_millis(self.remote_timeout_ms)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BenchConfig {
    pub noise: NoiseModel,
    pub scheduler: StrategyConfig,
    pub tools: ToolsConfig,
}

impl BenchConfig {
    pub fn from_toml(text: &str, origin: &str) -> Result<Self, ConfigError> {
        let cfg: BenchConfig =
            toml::from_str(text).map_err(|e| ConfigError::Parse { path: origin.to_string(), message: e.message().to_string() })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)?;
        Self::from_toml(&text, &path.display().to_string())
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        self.noise.validate().map_err(ConfigError::Invalid)?;
        self.scheduler.validate().map_err(ConfigError::Invalid)?;
        if self.tools.remote_timeout_ms == 0 {
            return Err(ConfigError::Invalid("tools.remote_timeout_ms must be positive".into()));
        }
        Ok(())
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }
}
