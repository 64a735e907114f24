use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::error::CliResult;
use crate::io::{sibling, to_json, write_file};

/// Provenance record written next to the primary output of every run. It
/// carries the wall-clock duration, so it is not byte-stable across runs.
#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub version: String,
    pub seed: u64,
    pub workers: Option<usize>,
    pub config: serde_json::Value,
    pub outputs: Vec<PathBuf>,
    pub duration_seconds: f64,
}

impl RunManifest {
    pub fn path_for(primary: &Path) -> PathBuf {
        sibling(primary, "manifest.json")
    }

    pub fn write(&self, primary: &Path) -> CliResult<PathBuf> {
        let path = Self::path_for(primary);
        write_file(&path, &to_json(self)?)?;
        Ok(path)
    }
}
