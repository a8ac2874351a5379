//! TOML run configuration. Every section and key is optional.

use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::extract::ExtractionConfig;
use crate::index::DEFAULT_NODE_CAPACITY;
use crate::quality::QualityConfig;
use crate::query::DEFAULT_ROW_CAP;
use crate::sampler::SamplerConfig;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Io {
        path: std::path::PathBuf,
        source: std::io::Error,
    },
    #[error("invalid config: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("invalid config: {0}")]
    Value(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IndexConfig {
    pub node_capacity: usize,
}

impl Default for IndexConfig {
    fn default() -> Self {
        IndexConfig {
            node_capacity: DEFAULT_NODE_CAPACITY,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ValidationConfig {
    pub row_cap: usize,
}

impl Default for ValidationConfig {
    fn default() -> Self {
        ValidationConfig {
            row_cap: DEFAULT_ROW_CAP,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub extraction: ExtractionConfig,
    pub quality: QualityConfig,
    pub index: IndexConfig,
    pub sampler: SamplerConfig,
    pub validation: ValidationConfig,
}

impl Config {
    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        let cfg: Config = toml::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, ConfigError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_toml(&text)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let v = |e: &dyn std::fmt::Display| ConfigError::Value(e.to_string());
        self.extraction.validate().map_err(|e| v(&e))?;
        self.quality.validate().map_err(|e| v(&e))?;
        self.sampler.validate().map_err(|e| v(&e))?;
        if self.index.node_capacity < 2 {
            return Err(ConfigError::Value("index.node_capacity must be at least 2".into()));
        }
        if self.validation.row_cap == 0 {
            return Err(ConfigError::Value("validation.row_cap must be at least 1".into()));
        }
        Ok(())
    }
}
