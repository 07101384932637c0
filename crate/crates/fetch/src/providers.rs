//! Live HTTP adapters for AS categories and prefix ownership.
//!
//! Both read an ipinfo-style JSON API:
//!
//! * `GET {base}/AS{n}/json` returns an object whose `type` field is one of
//!   `isp`, `business`, `hosting` or `education`.
//! * `GET {base}/{ip}/json` returns an object carrying the announcing AS,
//!   either as `asn.asn` (`"AS7018"`) or as the leading token of `org`
//!   (`"AS7018 AT&T Services, Inc."`). A 404 means no record.
//!
//! A `token`, when set, is sent as `?token=`. Responses are cached for the
//! lifetime of the adapter and requests are spaced by `min_interval`.

use std::collections::HashMap;
use std::sync::Mutex;
use std::time::Duration;

use geofeed_core::analytics::{AsCategory, AsInfoProvider, ProviderError};
use geofeed_core::auth::{MatchRule, Owner, OwnershipSource, SourceError};
use geofeed_core::prefix::Prefix;
use geofeed_core::rpsl::parse_asn;
use serde_json::Value;

use crate::HostGate;

#[derive(Debug, Clone)]
pub struct ApiConfig {
    pub base_url: String,
    pub token: Option<String>,
    pub timeout: Duration,
    pub min_interval: Duration,
}

impl ApiConfig {
    pub fn new(base_url: impl Into<String>) -> Self {
        ApiConfig { base_url: base_url.into(), token: None, timeout: Duration::from_secs(10), min_interval: Duration::from_millis(100) }
    }
}

#[derive(Debug)]
struct JsonClient {
    agent: ureq::Agent,
    config: ApiConfig,
    gate: HostGate,
    cache: Mutex<HashMap<String, Result<Option<Value>, String>>>,
}

impl JsonClient {
    fn new(config: ApiConfig) -> Self {
        let agent = ureq::Agent::new_with_config(
            ureq::Agent::config_builder().timeout_global(Some(config.timeout)).http_status_as_error(false).build(),
        );
        let gate = HostGate::new(1, config.min_interval);
        JsonClient { agent, config, gate, cache: Mutex::default() }
    }

    /// `Ok(None)` on 404.
    fn get(&self, path: &str) -> Result<Option<Value>, String> {
        if let Some(hit) = self.cache.lock().expect("cache poisoned").get(path) {
            return hit.clone();
        }
        let result = self.fetch(path);
        self.cache.lock().expect("cache poisoned").insert(path.to_string(), result.clone());
        result
    }

    fn fetch(&self, path: &str) -> Result<Option<Value>, String> {
        let mut url = format!("{}/{path}", self.config.base_url.trim_end_matches('/'));
        if let Some(t) = &self.config.token {
            url.push_str("?token=");
            url.push_str(t);
        }
        let _permit = self.gate.acquire(&self.config.base_url);
        let mut resp = self.agent.get(&url).call().map_err(|e| e.to_string())?;
        match resp.status().as_u16() {
            404 => Ok(None),
            200..=299 => {
                let text = resp.body_mut().read_to_string().map_err(|e| e.to_string())?;
                serde_json::from_str(&text).map(Some).map_err(|e| e.to_string())
            }
            code => Err(format!("HTTP {code}")),
        }
    }
}

/// AS categories from the live API.
#[derive(Debug)]
pub struct HttpAsInfo {
    client: JsonClient,
}

impl HttpAsInfo {
    pub fn new(config: ApiConfig) -> Self {
        HttpAsInfo { client: JsonClient::new(config) }
    }
}

impl AsInfoProvider for HttpAsInfo {
    fn category(&self, asn: u32) -> Result<AsCategory, ProviderError> {
        let v = self.client.get(&format!("AS{asn}/json")).map_err(ProviderError)?;
        let label = v.as_ref().and_then(|v| v.get("type")).and_then(Value::as_str);
        Ok(label.map_or(AsCategory::Unknown, AsCategory::from_label))
    }
}

/// Prefix owners from the live API, looked up by the prefix base address.
/// The API only answers covering lookups, so the match rule is ignored.
#[derive(Debug)]
pub struct HttpOwnership {
    client: JsonClient,
}

impl HttpOwnership {
    pub fn new(config: ApiConfig) -> Self {
        HttpOwnership { client: JsonClient::new(config) }
    }
}

fn owner_from(v: &Value) -> Option<Owner> {
    let asn = v.get("asn").and_then(|a| a.get("asn").and_then(Value::as_str).or_else(|| a.as_str()));
    let org = v.get("org").and_then(Value::as_str);
    asn.or(org).and_then(parse_asn).map(Owner::Asn)
}

impl OwnershipSource for HttpOwnership {
    fn owners(&self, prefix: &Prefix, _rule: MatchRule) -> Result<Vec<Owner>, SourceError> {
        let v = self.client.get(&format!("{}/json", prefix.base())).map_err(SourceError::SourceUnavailable)?;
        Ok(v.as_ref().and_then(owner_from).into_iter().collect())
    }
}
