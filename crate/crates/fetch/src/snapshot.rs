//! Crawl snapshots: `<dir>/<digest[0..2]>/<digest>.csv` bodies plus
//! `<dir>/index.jsonl` with one entry per URL, sorted by URL.

use std::collections::BTreeMap;
use std::fs;
use std::io::{self, BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::time::Duration;

use chrono::{DateTime, Utc};
use geofeed_core::geofeed::sha256_hex;
use serde::{Deserialize, Serialize};

use crate::{AvailabilitySummary, FetchOutcome, FetchStatus, StatusKind};

pub const INDEX_FILE: &str = "index.jsonl";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SnapshotEntry {
    pub url: String,
    pub status: StatusKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub http_code: Option<u16>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub detail: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub digest: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub final_url: Option<String>,
    pub timestamp: DateTime<Utc>,
    pub elapsed_ms: u64,
    pub attempts: u32,
    #[serde(default)]
    pub redirects: u32,
}

impl SnapshotEntry {
    pub fn from_outcome(o: &FetchOutcome) -> Self {
        let mut e = SnapshotEntry {
            url: o.url.clone(),
            status: o.status.kind(),
            http_code: None,
            detail: None,
            digest: None,
            final_url: None,
            timestamp: o.fetched_at,
            elapsed_ms: o.elapsed.as_millis() as u64,
            attempts: o.attempts,
            redirects: o.redirects,
        };
        match &o.status {
            FetchStatus::Ok { final_url, content_digest, .. } => {
                e.digest = Some(content_digest.clone());
                e.final_url = Some(final_url.clone());
            }
            FetchStatus::HttpError { code } => e.http_code = Some(*code),
            FetchStatus::ConnectionError { detail } => e.detail = Some(detail.clone()),
            FetchStatus::SchemeRefused { scheme } => e.detail = Some(scheme.clone()),
            _ => {}
        }
        e
    }
}

#[derive(Debug, thiserror::Error)]
pub enum SnapshotError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("{path} line {line}: {message}")]
    Index { path: PathBuf, line: usize, message: String },
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> SnapshotError + '_ {
    move |source| SnapshotError::Io { path: path.to_path_buf(), source }
}

#[derive(Debug, Clone)]
pub struct Snapshot {
    dir: PathBuf,
    entries: BTreeMap<String, SnapshotEntry>,
}

impl Snapshot {
    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn body_path(dir: &Path, digest: &str) -> PathBuf {
        dir.join(&digest[..2.min(digest.len())]).join(format!("{digest}.csv"))
    }

    /// Writes bodies and a fresh index for `outcomes`.
    pub fn write<'a>(dir: &Path, outcomes: impl IntoIterator<Item = &'a FetchOutcome>) -> Result<Snapshot, SnapshotError> {
        fs::create_dir_all(dir).map_err(io_err(dir))?;
        let mut entries = BTreeMap::new();
        for o in outcomes {
            if let FetchStatus::Ok { body, content_digest, .. } = &o.status {
                let path = Self::body_path(dir, content_digest);
                if !path.exists() {
                    let parent = path.parent().expect("digest directory");
                    fs::create_dir_all(parent).map_err(io_err(parent))?;
                    fs::write(&path, body).map_err(io_err(&path))?;
                }
            }
            entries.insert(o.url.clone(), SnapshotEntry::from_outcome(o));
        }
        let index = dir.join(INDEX_FILE);
        let mut out = io::BufWriter::new(fs::File::create(&index).map_err(io_err(&index))?);
        for e in entries.values() {
            let line = serde_json::to_string(e).expect("entry serializes");
            writeln!(out, "{line}").map_err(io_err(&index))?;
        }
        out.flush().map_err(io_err(&index))?;
        Ok(Snapshot { dir: dir.to_path_buf(), entries })
    }

    pub fn open(dir: &Path) -> Result<Snapshot, SnapshotError> {
        let index = dir.join(INDEX_FILE);
        let file = fs::File::open(&index).map_err(io_err(&index))?;
        let mut entries = BTreeMap::new();
        for (i, line) in BufReader::new(file).lines().enumerate() {
            let line = line.map_err(io_err(&index))?;
            if line.trim().is_empty() {
                continue;
            }
            let e: SnapshotEntry = serde_json::from_str(&line).map_err(|err| SnapshotError::Index {
                path: index.clone(),
                line: i + 1,
                message: err.to_string(),
            })?;
            entries.insert(e.url.clone(), e);
        }
        Ok(Snapshot { dir: dir.to_path_buf(), entries })
    }

    pub fn entries(&self) -> impl Iterator<Item = &SnapshotEntry> {
        self.entries.values()
    }

    pub fn get(&self, url: &str) -> Option<&SnapshotEntry> {
        self.entries.get(url)
    }

    /// Stored body of a successful fetch, checked against its digest.
    pub fn load_body(&self, entry: &SnapshotEntry) -> Result<Option<Vec<u8>>, SnapshotError> {
        let Some(digest) = &entry.digest else { return Ok(None) };
        let path = Self::body_path(&self.dir, digest);
        let body = fs::read(&path).map_err(io_err(&path))?;
        if sha256_hex(&body) != *digest {
            return Err(SnapshotError::Index { path, line: 0, message: "body does not match its digest".into() });
        }
        Ok(Some(body))
    }

    /// Rebuilds a successful outcome from the cache. None when the URL was
    /// not fetched successfully or its body is missing.
    pub fn load_outcome(&self, url: &str) -> Option<FetchOutcome> {
        let e = self.entries.get(url)?;
        let body = self.load_body(e).ok()??;
        Some(FetchOutcome {
            url: e.url.clone(),
            status: FetchStatus::Ok {
                body,
                final_url: e.final_url.clone().unwrap_or_else(|| e.url.clone()),
                content_digest: e.digest.clone()?,
            },
            elapsed: Duration::from_millis(e.elapsed_ms),
            attempts: e.attempts,
            redirects: e.redirects,
            fetched_at: e.timestamp,
        })
    }

    pub fn summary(&self) -> AvailabilitySummary {
        AvailabilitySummary::from_parts(self.entries.values().map(|e| (e.status, e.http_code)))
    }
}
