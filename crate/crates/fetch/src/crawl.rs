use std::collections::{BTreeMap, BTreeSet};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::Duration;

use chrono::Utc;
use serde::Serialize;

use crate::snapshot::Snapshot;
use crate::{FetchOutcome, FetchPolicy, FetchStatus, Fetcher, PolicyError, StatusKind};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AvailabilitySummary {
    pub total: u64,
    pub accessible: u64,
    pub inaccessible: u64,
    /// `inaccessible / total`, 0 for an empty crawl.
    pub fraction_inaccessible: f64,
    pub per_status: BTreeMap<StatusKind, u64>,
    pub http_codes: BTreeMap<u16, u64>,
}

impl AvailabilitySummary {
    /// Summary over (status, HTTP code) pairs. Order does not matter.
    pub fn from_parts(parts: impl IntoIterator<Item = (StatusKind, Option<u16>)>) -> Self {
        let mut per_status: BTreeMap<StatusKind, u64> = StatusKind::ALL.iter().map(|k| (*k, 0)).collect();
        let mut http_codes = BTreeMap::new();
        let mut total = 0;
        for (kind, code) in parts {
            total += 1;
            *per_status.entry(kind).or_default() += 1;
            if let Some(c) = code {
                *http_codes.entry(c).or_default() += 1;
            }
        }
        let accessible = per_status[&StatusKind::Ok];
        let inaccessible = total - accessible;
        AvailabilitySummary {
            total,
            accessible,
            inaccessible,
            fraction_inaccessible: if total == 0 { 0.0 } else { inaccessible as f64 / total as f64 },
            per_status,
            http_codes,
        }
    }

    pub fn from_outcomes<'a>(outcomes: impl IntoIterator<Item = &'a FetchOutcome>) -> Self {
        Self::from_parts(outcomes.into_iter().map(|o| {
            let code = match o.status {
                FetchStatus::HttpError { code } => Some(code),
                _ => None,
            };
            (o.status.kind(), code)
        }))
    }
}

#[derive(Debug, Clone)]
pub struct CrawlResult {
    pub outcomes: BTreeMap<String, FetchOutcome>,
    pub summary: AvailabilitySummary,
}

fn dedup(urls: &[String]) -> Vec<String> {
    urls.iter().cloned().collect::<BTreeSet<_>>().into_iter().collect()
}

/// Fetches every distinct URL with at most `policy.parallelism` requests in
/// flight. Blocks until all are done.
pub fn crawl_corpus(urls: &[String], policy: &FetchPolicy) -> Result<CrawlResult, PolicyError> {
    let fetcher = Fetcher::new(policy.clone())?;
    let urls = dedup(urls);
    let next = AtomicUsize::new(0);
    let results = Mutex::new(BTreeMap::new());
    let workers = policy.parallelism.min(urls.len()).max(1);
    std::thread::scope(|s| {
        for _ in 0..workers {
            s.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                let Some(url) = urls.get(i) else { break };
                let outcome = fetcher.fetch(url);
                results.lock().expect("results poisoned").insert(url.clone(), outcome);
            });
        }
    });
    let outcomes = results.into_inner().expect("results poisoned");
    let summary = AvailabilitySummary::from_outcomes(outcomes.values());
    Ok(CrawlResult { outcomes, summary })
}

/// Offline crawl: URLs with a stored body come from `cache`, everything
/// else is a connection error.
pub fn crawl_offline(urls: &[String], cache: Option<&Snapshot>) -> CrawlResult {
    let mut outcomes = BTreeMap::new();
    for url in dedup(urls) {
        let cached = cache.and_then(|c| c.load_outcome(&url));
        let outcome = cached.unwrap_or_else(|| FetchOutcome {
            url: url.clone(),
            status: FetchStatus::ConnectionError { detail: "offline: not in cache".into() },
            elapsed: Duration::ZERO,
            attempts: 0,
            redirects: 0,
            fetched_at: Utc::now(),
        });
        outcomes.insert(url, outcome);
    }
    let summary = AvailabilitySummary::from_outcomes(outcomes.values());
    CrawlResult { outcomes, summary }
}
