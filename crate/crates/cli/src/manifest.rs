//! Run manifests: which artifacts a command produced, under which config.

use crate::config::ExperimentConfig;
use crate::error::CliResult;
use serde::{Deserialize, Serialize};
use std::path::Path;
use std::time::{SystemTime, UNIX_EPOCH};

#[derive(Debug, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool_version: String,
    pub command: String,
    pub config_hash: String,
    /// Paths relative to the run directory, sorted.
    pub artifacts: Vec<String>,
    pub created_unix: u64,
}

/// Hash of the canonicalized config JSON; key order in the source file does
/// not matter because the value round-trips through a sorted map.
pub fn config_hash(config: &ExperimentConfig) -> String {
    let value = serde_json::to_value(config).expect("config serializes");
    let canonical = serde_json::to_string(&value).expect("value serializes");
    let mut h = 0xcbf2_9ce4_8422_2325u64;
    for b in canonical.as_bytes() {
        h ^= *b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    format!("{h:016x}")
}

pub fn write_manifest(
    out_dir: &Path,
    command: &str,
    config: Option<&ExperimentConfig>,
    mut artifacts: Vec<String>,
) -> CliResult<()> {
    artifacts.sort();
    let manifest = RunManifest {
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        command: command.to_string(),
        config_hash: config.map(config_hash).unwrap_or_default(),
        artifacts,
        created_unix: SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0),
    };
    let path = out_dir.join(format!("manifest_{command}.json"));
    std::fs::write(path, serde_json::to_string_pretty(&manifest)?)?;
    Ok(())
}
