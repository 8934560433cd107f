//! Shared output plumbing: distribution dumps, JSON writing, run
//! directories, seed resolution.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::Serialize;

use crate::error::CliError;

/// A labeled probability distribution with free-form metadata
/// (schema: `docs/schemas/distribution_dump.schema.json`).
///
/// Invariant: `probabilities` has the same length as `labels` and sums to 1
/// within 1e-9.
#[derive(Debug, Serialize)]
pub struct DistributionDump {
    pub labels: Vec<usize>,
    pub probabilities: Vec<f64>,
    pub metadata: serde_json::Value,
}

impl DistributionDump {
    pub fn new(probabilities: Vec<f64>, metadata: serde_json::Value) -> Self {
        debug_assert!((probabilities.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        Self {
            labels: (0..probabilities.len()).collect(),
            probabilities,
            metadata,
        }
    }
}

/// Serializes `value` as pretty JSON with a trailing newline.
pub fn to_json_text<T: Serialize>(value: &T) -> Result<String, CliError> {
    let mut text = serde_json::to_string_pretty(value)
        .map_err(|e| CliError::Internal(format!("JSON encoding failed: {e}")))?;
    text.push('\n');
    Ok(text)
}

/// Writes `value` as pretty JSON to `path`, creating parent directories.
pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent)
            .map_err(|e| CliError::Input(format!("cannot create {}: {e}", parent.display())))?;
    }
    let text = to_json_text(value)?;
    fs::write(path, text).map_err(|e| CliError::Input(format!("cannot write {}: {e}", path.display())))
}

/// Resolves the directory a run writes into. With an explicit seed the base
/// directory is used as is, so reruns are reproducible; otherwise each run
/// gets a fresh timestamped subdirectory.
pub fn resolve_run_dir(base: &Path, seeded: bool) -> PathBuf {
    if seeded {
        return base.to_path_buf();
    }
    let millis = SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_millis())
        .unwrap_or(0);
    // Suffix avoids collisions when two unseeded runs start the same millisecond.
    let tag: u16 = rand::random();
    base.join(format!("run-{millis}-{tag:04x}"))
}

/// The seed to use: the explicit one, or a random one that gets printed so
/// the run can be reproduced.
pub fn resolve_seed(explicit: Option<u64>) -> u64 {
    match explicit {
        Some(seed) => seed,
        None => {
            let seed: u64 = rand::random();
            println!("seed: {seed} (chosen randomly; pass --seed {seed} to reproduce)");
            seed
        }
    }
}

/// Reads a file, mapping failures to exit 3.
pub fn read_file(path: &Path) -> Result<Vec<u8>, CliError> {
    fs::read(path).map_err(|e| CliError::Input(format!("cannot read {}: {e}", path.display())))
}

/// Reads a UTF-8 text file, mapping failures to exit 3.
pub fn read_text(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path)
        .map_err(|e| CliError::Input(format!("cannot read {}: {e}", path.display())))
}
