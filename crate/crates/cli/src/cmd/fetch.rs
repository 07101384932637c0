use std::collections::BTreeSet;
use std::path::PathBuf;
use std::time::Duration;

use anyhow::{Context, Result};
use geofeed_core::analytics::{ases_per_rir, AsCategory, AsInfoProvider};
use geofeed_core::LocatorIndexEntry;
use geofeed_fetch::providers::{ApiConfig, HttpAsInfo};
use geofeed_fetch::snapshot::{Snapshot, INDEX_FILE};
use geofeed_fetch::{crawl_corpus, crawl_offline, AvailabilitySummary, FetchPolicy, StatusKind};
use serde::Serialize;

use crate::config::Settings;
use crate::manifest::{self, Run};
use crate::{util, Status};

/// Flags mirroring the fetch policy.
#[derive(Debug, Clone, clap::Args)]
pub struct PolicyArgs {
    /// Per-attempt timeout [default: 10000]
    #[arg(long, env = "GEOFEED_TIMEOUT_MS")]
    pub timeout_ms: Option<u64>,
    /// Retries after connection errors and timeouts [default: 2]
    #[arg(long, env = "GEOFEED_RETRIES")]
    pub retries: Option<u32>,
    /// Redirects followed per attempt [default: 5]
    #[arg(long, env = "GEOFEED_REDIRECTS")]
    pub redirects: Option<u32>,
    /// Largest accepted body in bytes [default: 67108864]
    #[arg(long, env = "GEOFEED_MAX_BODY")]
    pub max_body: Option<u64>,
    /// Requests in flight [default: 8]
    #[arg(long, env = "GEOFEED_PARALLELISM")]
    pub parallelism: Option<usize>,
    /// Also fetch plain-http URLs [default: false]
    #[arg(long, env = "GEOFEED_ALLOW_INSECURE", num_args = 0..=1, default_missing_value = "true")]
    pub allow_insecure: Option<bool>,
    /// Simultaneous requests per host [default: 2]
    #[arg(long, env = "GEOFEED_PER_HOST_CONCURRENCY")]
    pub per_host_concurrency: Option<usize>,
    /// Spacing between request starts per host [default: 1000]
    #[arg(long, env = "GEOFEED_PER_HOST_DELAY_MS")]
    pub per_host_delay_ms: Option<u64>,
    #[arg(long, env = "GEOFEED_USER_AGENT")]
    pub user_agent: Option<String>,
}

impl PolicyArgs {
    pub fn resolve(self, s: &mut Settings) -> Result<FetchPolicy> {
        let d = FetchPolicy::default();
        let policy = FetchPolicy {
            timeout: Duration::from_millis(s.get("timeout-ms", self.timeout_ms, d.timeout.as_millis() as u64)?),
            retry_limit: s.get("retries", self.retries, d.retry_limit)?,
            redirect_limit: s.get("redirects", self.redirects, d.redirect_limit)?,
            max_body: s.get("max-body", self.max_body, d.max_body)?,
            parallelism: s.get("parallelism", self.parallelism, d.parallelism)?,
            allow_insecure: s.get("allow-insecure", self.allow_insecure, d.allow_insecure)?,
            per_host_concurrency: s.get("per-host-concurrency", self.per_host_concurrency, d.per_host_concurrency)?,
            per_host_delay: Duration::from_millis(s.get(
                "per-host-delay-ms",
                self.per_host_delay_ms,
                d.per_host_delay.as_millis() as u64,
            )?),
            user_agent: s.get("user-agent", self.user_agent, d.user_agent)?,
        };
        policy.validate()?;
        Ok(policy)
    }
}

#[derive(Debug, clap::Args)]
pub struct Args {
    /// Locator index from `discover`.
    pub index: PathBuf,
    /// Snapshot directory to write.
    #[arg(long)]
    pub output_dir: PathBuf,
    #[command(flatten)]
    pub policy: PolicyArgs,
    /// Do not touch the network; serve bodies from --cache only.
    #[arg(long, env = "GEOFEED_OFFLINE", num_args = 0..=1, default_missing_value = "true")]
    pub offline: Option<bool>,
    /// Earlier snapshot used by --offline [default: the output directory]
    #[arg(long, env = "GEOFEED_CACHE")]
    pub cache: Option<PathBuf>,
    /// Also look up the category of every origin AS in the index at this
    /// API base and write `as_categories.jsonl`.
    #[arg(long, env = "GEOFEED_AS_CATEGORIES_API")]
    pub as_categories_api: Option<String>,
    #[arg(long, env = "GEOFEED_API_TOKEN", hide_env_values = true)]
    pub api_token: Option<String>,
    /// Spacing between API requests [default: 100]
    #[arg(long, env = "GEOFEED_API_INTERVAL_MS")]
    pub api_interval_ms: Option<u64>,
}

#[derive(Serialize)]
struct CategoryRow {
    asn: u32,
    category: &'static str,
}

pub fn run(args: Args, s: &mut Settings) -> Result<Status> {
    let mut run = Run::new("fetch");
    run.input(&args.index);
    let entries: Vec<LocatorIndexEntry> = util::read_jsonl(&args.index)?;
    let urls: Vec<String> = entries.iter().map(|e| e.url.clone()).collect::<BTreeSet<_>>().into_iter().collect();
    let offline = s.get("offline", args.offline, false)?;
    let result = if offline {
        let cache_dir = s.optional("cache", args.cache.as_ref().map(|p| p.display().to_string()))?;
        let cache_dir = cache_dir.map(PathBuf::from).unwrap_or_else(|| args.output_dir.clone());
        let cache = if cache_dir.join(INDEX_FILE).exists() {
            run.input(cache_dir.join(INDEX_FILE));
            Some(Snapshot::open(&cache_dir).with_context(|| format!("opening cache {}", cache_dir.display()))?)
        } else {
            None
        };
        crawl_offline(&urls, cache.as_ref())
    } else {
        let policy = args.policy.resolve(s)?;
        crawl_corpus(&urls, &policy)?
    };
    Snapshot::write(&args.output_dir, result.outcomes.values())?;
    run.output(args.output_dir.join(INDEX_FILE));

    let summary_path = args.output_dir.join("availability.json");
    util::write_json(&summary_path, &result.summary)?;
    run.output(&summary_path);
    let csv_path = args.output_dir.join("availability.csv");
    write_summary_csv(&csv_path, &result.summary)?;
    run.output(&csv_path);

    if let Some(base) = s.optional("as-categories-api", args.as_categories_api)? {
        let mut config = ApiConfig::new(base);
        config.token = s.optional("api-token", args.api_token)?;
        config.min_interval = Duration::from_millis(s.get("api-interval-ms", args.api_interval_ms, 100)?);
        let provider = HttpAsInfo::new(config);
        let ases: BTreeSet<u32> = ases_per_rir(&entries).into_values().flatten().collect();
        let rows: Vec<CategoryRow> = ases
            .into_iter()
            .map(|asn| CategoryRow { asn, category: provider.category(asn).unwrap_or(AsCategory::Unknown).as_str() })
            .collect();
        let path = args.output_dir.join("as_categories.jsonl");
        util::write_jsonl(&path, &rows)?;
        run.output(&path);
    }

    let sm = &result.summary;
    eprintln!(
        "{} URLs: {} accessible, {} inaccessible ({:.2}%)",
        sm.total,
        sm.accessible,
        sm.inaccessible,
        sm.fraction_inaccessible * 100.0
    );
    run.finish(&manifest::in_dir(&args.output_dir), s, 0)?;
    Ok(Status::Success)
}

fn write_summary_csv(path: &std::path::Path, sm: &AvailabilitySummary) -> Result<()> {
    let mut w = util::csv_writer(path)?;
    w.write_record(["status", "http_code", "count"])?;
    for kind in StatusKind::ALL {
        w.write_record([kind.as_str(), "", &sm.per_status.get(&kind).copied().unwrap_or(0).to_string()])?;
    }
    for (code, n) in &sm.http_codes {
        w.write_record(["http_error", &code.to_string(), &n.to_string()])?;
    }
    w.flush()?;
    Ok(())
}
