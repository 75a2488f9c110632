use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::dataset::write_json;
use crate::error::Result;

/// Record of one successful run, written as JSON.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub tool_version: String,
    /// Fully resolved flags, after config merging and defaults.
    pub config: Value,
    pub inputs: Vec<PathBuf>,
    pub outputs: Vec<PathBuf>,
    pub duration_s: f64,
    pub case_count: usize,
    /// Command-specific results (scheme bounds, maxT, ...).
    #[serde(default)]
    pub details: Value,
}

impl RunManifest {
    pub fn write(&self, path: &Path) -> Result<()> {
        write_json(self, path)
    }
}

/// Default manifest location: `DIR/manifest.json` for directory outputs,
/// `<stem>.manifest.json` beside file outputs.
pub fn default_path(output: &Path, is_dir: bool) -> PathBuf {
    if is_dir {
        return output.join("manifest.json");
    }
    let stem = output
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "run".into());
    output.with_file_name(format!("{stem}.manifest.json"))
}
