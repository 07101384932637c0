use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use anyhow::Result;
use chrono::{DateTime, Utc};
use geofeed_core::geofeed::sha256_hex;
use serde::Serialize;

use crate::config::Settings;
use crate::util;

#[derive(Debug, Clone, Serialize)]
pub struct FileDigest {
    pub path: String,
    pub sha256: String,
}

impl FileDigest {
    fn of(path: &Path) -> Result<FileDigest> {
        let bytes = util::read_bytes(path)?;
        Ok(FileDigest { path: path.display().to_string(), sha256: sha256_hex(&bytes) })
    }
}

/// Record of one run, written next to its outputs.
#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub argv: Vec<String>,
    pub tool_version: String,
    pub started_at: DateTime<Utc>,
    pub finished_at: DateTime<Utc>,
    pub inputs: Vec<FileDigest>,
    pub config: BTreeMap<String, String>,
    pub outputs: Vec<FileDigest>,
    pub exit_code: i32,
}

/// Collects inputs and outputs while a command runs.
#[derive(Debug)]
pub struct Run {
    command: String,
    started_at: DateTime<Utc>,
    inputs: Vec<PathBuf>,
    outputs: Vec<PathBuf>,
}

impl Run {
    pub fn new(command: &str) -> Run {
        Run { command: command.to_string(), started_at: Utc::now(), inputs: Vec::new(), outputs: Vec::new() }
    }

    pub fn input(&mut self, path: impl Into<PathBuf>) {
        self.inputs.push(path.into());
    }

    pub fn output(&mut self, path: impl Into<PathBuf>) {
        self.outputs.push(path.into());
    }

    /// Writes the manifest to `path`.
    pub fn finish(self, path: &Path, settings: &Settings, exit_code: i32) -> Result<()> {
        let digests =
            |paths: &[PathBuf]| -> Result<Vec<FileDigest>> { paths.iter().filter(|p| p.is_file()).map(|p| FileDigest::of(p)).collect() };
        let manifest = RunManifest {
            command: self.command,
            argv: std::env::args().collect(),
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            started_at: self.started_at,
            finished_at: Utc::now(),
            inputs: digests(&self.inputs)?,
            config: settings.snapshot(),
            outputs: digests(&self.outputs)?,
            exit_code,
        };
        util::write_json(path, &manifest)
    }
}

/// `<dir>/manifest.json`.
pub fn in_dir(dir: &Path) -> PathBuf {
    dir.join("manifest.json")
}

/// `<file>.manifest.json`, next to a single-file output.
pub fn beside(file: &Path) -> PathBuf {
    let mut name = file.file_name().map(|n| n.to_os_string()).unwrap_or_default();
    name.push(".manifest.json");
    file.with_file_name(name)
}
