//! Geofeed retrieval: single-URL fetches with a fixed failure taxonomy, a
//! bounded-parallel crawler with per-host politeness, and on-disk crawl
//! snapshots for offline validation.

mod crawl;
pub mod fixture;
mod gate;
pub mod providers;
pub mod snapshot;

use std::io::Read;
use std::net::ToSocketAddrs;
use std::time::{Duration, Instant};

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use url::Url;

pub use crawl::{crawl_corpus, crawl_offline, AvailabilitySummary, CrawlResult};
pub use gate::HostGate;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FetchPolicy {
    #[serde(with = "duration_ms")]
    pub timeout: Duration,
    pub retry_limit: u32,
    pub redirect_limit: u32,
    pub max_body: u64,
    pub parallelism: usize,
    /// Fetch plain-http URLs (and follow https→http redirects) so they can
    /// still be measured.
    pub allow_insecure: bool,
    /// Simultaneous requests to one host:port.
    pub per_host_concurrency: usize,
    /// Minimum spacing between request starts to one host:port.
    #[serde(with = "duration_ms")]
    pub per_host_delay: Duration,
    pub user_agent: String,
}

impl Default for FetchPolicy {
    fn default() -> Self {
        FetchPolicy {
            timeout: Duration::from_secs(10),
            retry_limit: 2,
            redirect_limit: 5,
            max_body: 64 << 20,
            parallelism: 8,
            allow_insecure: false,
            per_host_concurrency: 2,
            per_host_delay: Duration::from_secs(1),
            user_agent: concat!("geofeed-fetch/", env!("CARGO_PKG_VERSION")).to_string(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum PolicyError {
    #[error("parallelism must be at least 1")]
    Parallelism,
    #[error("max_body must be positive")]
    MaxBody,
    #[error("per-host concurrency must be at least 1")]
    PerHost,
}

impl FetchPolicy {
    pub fn validate(&self) -> Result<(), PolicyError> {
        if self.parallelism == 0 {
            return Err(PolicyError::Parallelism);
        }
        if self.max_body == 0 {
            return Err(PolicyError::MaxBody);
        }
        if self.per_host_concurrency == 0 {
            return Err(PolicyError::PerHost);
        }
        Ok(())
    }
}

pub(crate) mod duration_ms {
    use std::time::Duration;

    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(d: &Duration, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_u64(d.as_millis() as u64)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Duration, D::Error> {
        Ok(Duration::from_millis(u64::deserialize(d)?))
    }
}

/// Why a fetch ended. Only `Ok` counts as accessible.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum FetchStatus {
    Ok {
        #[serde(skip)]
        body: Vec<u8>,
        final_url: String,
        /// Hex SHA-256 of the body.
        content_digest: String,
    },
    DnsFailure,
    ConnectionError {
        detail: String,
    },
    Timeout,
    HttpError {
        code: u16,
    },
    TooLarge,
    SchemeRefused {
        scheme: String,
    },
}

impl FetchStatus {
    pub fn kind(&self) -> StatusKind {
        match self {
            FetchStatus::Ok { .. } => StatusKind::Ok,
            FetchStatus::DnsFailure => StatusKind::DnsFailure,
            FetchStatus::ConnectionError { .. } => StatusKind::ConnectionError,
            FetchStatus::Timeout => StatusKind::Timeout,
            FetchStatus::HttpError { .. } => StatusKind::HttpError,
            FetchStatus::TooLarge => StatusKind::TooLarge,
            FetchStatus::SchemeRefused { .. } => StatusKind::SchemeRefused,
        }
    }

    fn retryable(&self) -> bool {
        matches!(self, FetchStatus::ConnectionError { .. } | FetchStatus::Timeout)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StatusKind {
    Ok,
    DnsFailure,
    ConnectionError,
    Timeout,
    HttpError,
    TooLarge,
    SchemeRefused,
}

impl StatusKind {
    pub const ALL: [StatusKind; 7] = [
        StatusKind::Ok,
        StatusKind::DnsFailure,
        StatusKind::ConnectionError,
        StatusKind::Timeout,
        StatusKind::HttpError,
        StatusKind::TooLarge,
        StatusKind::SchemeRefused,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            StatusKind::Ok => "ok",
            StatusKind::DnsFailure => "dns_failure",
            StatusKind::ConnectionError => "connection_error",
            StatusKind::Timeout => "timeout",
            StatusKind::HttpError => "http_error",
            StatusKind::TooLarge => "too_large",
            StatusKind::SchemeRefused => "scheme_refused",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FetchOutcome {
    pub url: String,
    #[serde(flatten)]
    pub status: FetchStatus,
    #[serde(rename = "elapsed_ms", with = "duration_ms")]
    pub elapsed: Duration,
    pub attempts: u32,
    pub redirects: u32,
    pub fetched_at: DateTime<Utc>,
}

impl FetchOutcome {
    pub fn body(&self) -> Option<&[u8]> {
        match &self.status {
            FetchStatus::Ok { body, .. } => Some(body),
            _ => None,
        }
    }
}

/// Reusable client for a policy. Cheap to share across threads.
#[derive(Debug, Clone)]
pub struct Fetcher {
    agent: ureq::Agent,
    policy: FetchPolicy,
    gate: HostGate,
    proxied: bool,
}

impl Fetcher {
    pub fn new(policy: FetchPolicy) -> Result<Self, PolicyError> {
        policy.validate()?;
        let config = ureq::Agent::config_builder()
            .timeout_global(Some(policy.timeout))
            .max_redirects(0)
            .http_status_as_error(false)
            .user_agent(policy.user_agent.as_str())
            .build();
        let proxied = config.proxy().is_some();
        let gate = HostGate::new(policy.per_host_concurrency, policy.per_host_delay);
        Ok(Fetcher { agent: ureq::Agent::new_with_config(config), policy, gate, proxied })
    }

    pub fn policy(&self) -> &FetchPolicy {
        &self.policy
    }

    /// Fetches one URL, retrying connection errors and timeouts only.
    pub fn fetch(&self, url: &str) -> FetchOutcome {
        let started = Instant::now();
        let fetched_at = Utc::now();
        let parsed = match Url::parse(url) {
            Ok(u) => u,
            Err(e) => {
                let status = FetchStatus::ConnectionError { detail: format!("bad url: {e}") };
                return FetchOutcome { url: url.to_string(), status, elapsed: started.elapsed(), attempts: 1, redirects: 0, fetched_at };
            }
        };
        let mut attempts = 0;
        let (status, redirects) = loop {
            attempts += 1;
            let (status, redirects) = self.attempt(parsed.clone());
            if !status.retryable() || attempts > self.policy.retry_limit {
                break (status, redirects);
            }
        };
        FetchOutcome { url: url.to_string(), status, elapsed: started.elapsed(), attempts, redirects, fetched_at }
    }

    /// One attempt, following redirects by hand so scheme downgrades can be
    /// refused.
    fn attempt(&self, mut current: Url) -> (FetchStatus, u32) {
        let mut redirects = 0;
        loop {
            if let Some(refused) = self.scheme_check(&current) {
                return (refused, redirects);
            }
            if let Some(failed) = self.resolve(&current) {
                return (failed, redirects);
            }
            let _permit = self.gate.acquire(&gate_key(&current));
            let mut resp = match self.agent.get(current.as_str()).call() {
                Ok(r) => r,
                Err(e) => return (map_error(e), redirects),
            };
            let code = resp.status().as_u16();
            if resp.status().is_redirection() {
                let location = resp.headers().get("location").and_then(|v| v.to_str().ok()).map(str::to_string);
                let Some(next) = location.and_then(|l| current.join(&l).ok()) else {
                    return (FetchStatus::HttpError { code }, redirects);
                };
                if redirects >= self.policy.redirect_limit {
                    return (FetchStatus::HttpError { code }, redirects);
                }
                redirects += 1;
                current = next;
                continue;
            }
            if !resp.status().is_success() {
                return (FetchStatus::HttpError { code }, redirects);
            }
            let limit = self.policy.max_body;
            let mut body = Vec::new();
            let read = resp.body_mut().as_reader().take(limit + 1).read_to_end(&mut body);
            return match read {
                Err(e) => (map_io(e), redirects),
                Ok(_) if body.len() as u64 > limit => (FetchStatus::TooLarge, redirects),
                Ok(_) => {
                    let content_digest = geofeed_core::geofeed::sha256_hex(&body);
                    (FetchStatus::Ok { body, final_url: current.to_string(), content_digest }, redirects)
                }
            };
        }
    }

    fn scheme_check(&self, url: &Url) -> Option<FetchStatus> {
        match url.scheme() {
            "https" => None,
            "http" if self.policy.allow_insecure => None,
            other => Some(FetchStatus::SchemeRefused { scheme: other.to_string() }),
        }
    }

    /// Resolves the host up front so DNS failures are told apart from
    /// connection failures. Skipped behind a proxy, which resolves for us.
    fn resolve(&self, url: &Url) -> Option<FetchStatus> {
        if self.proxied {
            return None;
        }
        let host = match url.host() {
            Some(url::Host::Domain(d)) => d,
            Some(_) => return None,
            None => return Some(FetchStatus::ConnectionError { detail: "url has no host".into() }),
        };
        let port = url.port_or_known_default().unwrap_or(443);
        let resolved = (host, port).to_socket_addrs().map(|mut a| a.next().is_some()).unwrap_or(false);
        (!resolved).then_some(FetchStatus::DnsFailure)
    }
}

/// Fetches a single URL under `policy`.
pub fn fetch_locator(url: &str, policy: &FetchPolicy) -> Result<FetchOutcome, PolicyError> {
    Ok(Fetcher::new(policy.clone())?.fetch(url))
}

pub(crate) fn gate_key(url: &Url) -> String {
    format!("{}:{}", url.host_str().unwrap_or(""), url.port_or_known_default().unwrap_or(0))
}

fn map_error(e: ureq::Error) -> FetchStatus {
    match e {
        ureq::Error::HostNotFound => FetchStatus::DnsFailure,
        ureq::Error::Timeout(_) => FetchStatus::Timeout,
        ureq::Error::BodyExceedsLimit(_) => FetchStatus::TooLarge,
        ureq::Error::StatusCode(code) => FetchStatus::HttpError { code },
        ureq::Error::Io(io) => map_io(io),
        other => FetchStatus::ConnectionError { detail: other.to_string() },
    }
}

fn map_io(e: std::io::Error) -> FetchStatus {
    use std::io::ErrorKind;
    match e.kind() {
        ErrorKind::TimedOut | ErrorKind::WouldBlock => FetchStatus::Timeout,
        _ => {
            // ureq wraps its own errors in io::Error when reading bodies.
            if let Some(inner) = e.get_ref().and_then(|i| i.downcast_ref::<ureq::Error>()) {
                if matches!(inner, ureq::Error::Timeout(_)) {
                    return FetchStatus::Timeout;
                }
            }
            FetchStatus::ConnectionError { detail: e.to_string() }
        }
    }
}
