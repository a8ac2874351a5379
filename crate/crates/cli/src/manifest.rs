use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use anyhow::{Context, Result};
use serde::Serialize;

use sscc_core::config::Config;
use sscc_core::fsutil::write_atomic;
use sscc_core::pipeline::throughput;

/// Seconds since the epoch, or `SOURCE_DATE_EPOCH` when set so that
/// reproducible builds can pin it.
pub fn timestamp() -> u64 {
    std::env::var("SOURCE_DATE_EPOCH")
        .ok()
        .and_then(|s| s.trim().parse().ok())
        .unwrap_or_else(|| SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs()))
}

/// Record of one command run, written to `<output>.run.json`.
#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub version: String,
    pub timestamp: u64,
    pub config: Config,
    pub inputs: Vec<PathBuf>,
    pub outputs: Vec<PathBuf>,
    pub wall_time_s: f64,
    /// Items emitted: retained relations, pairs, verdicts or entities.
    pub items: usize,
    /// `items / wall_time_s`.
    pub throughput: f64,
}

impl RunManifest {
    pub fn new(command: &str, config: &Config, inputs: &[&Path], outputs: &[&Path], started: Instant, items: usize) -> Self {
        let elapsed = started.elapsed();
        RunManifest {
            command: command.into(),
            version: env!("CARGO_PKG_VERSION").into(),
            timestamp: timestamp(),
            config: config.clone(),
            inputs: inputs.iter().map(|p| p.to_path_buf()).collect(),
            outputs: outputs.iter().map(|p| p.to_path_buf()).collect(),
            wall_time_s: elapsed.as_secs_f64(),
            items,
            throughput: throughput(items, elapsed),
        }
    }

    pub fn path_for(output: &Path) -> PathBuf {
        let trimmed = output.components().as_path();
        let mut s = trimmed.as_os_str().to_owned();
        s.push(".run.json");
        PathBuf::from(s)
    }

    pub fn write(&self, output: &Path) -> Result<PathBuf> {
        let path = Self::path_for(output);
        let mut json = serde_json::to_string_pretty(self)?;
        json.push('\n');
        write_atomic(&path, json.as_bytes()).with_context(|| format!("cannot write {}", path.display()))?;
        Ok(path)
    }
}
