use std::path::PathBuf;
use std::time::Duration;

use anyhow::{bail, Result};
use geofeed_core::auth::{compare_ownership, MatchRule, OwnerTable, OwnershipClaim, OwnershipSource};
use geofeed_fetch::providers::{ApiConfig, HttpOwnership};

use crate::config::Settings;
use crate::manifest::{self, Run};
use crate::util::{self, frac};
use crate::Status;

#[derive(Debug, Clone, Copy, clap::ValueEnum)]
pub enum SourceFormat {
    /// JSON lines `{prefix, max_length, asn}` from an RPKI snapshot.
    Rpki,
    /// JSON lines `{prefix, owner}` from a secondary provider.
    Provider,
}

#[derive(Debug, clap::Args)]
#[command(group(clap::ArgGroup::new("src").required(true).args(["source", "api"])))]
pub struct Args {
    /// Registry claims as JSON lines `{prefix, owner}`.
    #[arg(long)]
    pub claims: PathBuf,
    /// Ownership fixture file.
    #[arg(long)]
    pub source: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "rpki")]
    pub source_format: SourceFormat,
    /// Live ownership API base URL instead of a fixture (uses the network).
    #[arg(long, env = "GEOFEED_API")]
    pub api: Option<String>,
    #[arg(long, env = "GEOFEED_API_TOKEN", hide_env_values = true)]
    pub api_token: Option<String>,
    /// Spacing between API requests [default: 100]
    #[arg(long, env = "GEOFEED_API_INTERVAL_MS")]
    pub api_interval_ms: Option<u64>,
    /// `covering` matches the longest covering fixture prefix, `exact` only the same prefix [default: covering]
    #[arg(long, env = "GEOFEED_MATCH_RULE")]
    pub match_rule: Option<String>,
    #[arg(long)]
    pub output_dir: PathBuf,
}

fn parse_rule(text: &str) -> Result<MatchRule> {
    match text {
        "covering" => Ok(MatchRule::Covering),
        "exact" => Ok(MatchRule::Exact),
        other => bail!("unknown match rule {other:?}; expected covering or exact"),
    }
}

pub fn run(args: Args, s: &mut Settings) -> Result<Status> {
    let mut run = Run::new("ownership");
    run.input(&args.claims);
    let claims: Vec<OwnershipClaim> = util::read_jsonl(&args.claims)?;
    let rule = parse_rule(&s.get("match-rule", args.match_rule, "covering".to_string())?)?;
    let source: Box<dyn OwnershipSource> = match (&args.source, s.optional("api", args.api)?) {
        (Some(path), _) => {
            run.input(path);
            let reader = util::open_text(path)?;
            s.record("source-format", format!("{:?}", args.source_format).to_lowercase());
            Box::new(match args.source_format {
                SourceFormat::Rpki => OwnerTable::from_rpki_jsonl(reader)?,
                SourceFormat::Provider => OwnerTable::from_provider_jsonl(reader)?,
            })
        }
        (None, Some(base)) => {
            let mut config = ApiConfig::new(base);
            config.token = s.optional("api-token", args.api_token)?;
            config.min_interval = Duration::from_millis(s.get("api-interval-ms", args.api_interval_ms, 100)?);
            Box::new(HttpOwnership::new(config))
        }
        (None, None) => bail!("pass --source or --api"),
    };
    let (verdicts, summary) = compare_ownership(&claims, source.as_ref(), rule)?;

    let dir = &args.output_dir;
    let verdicts_path = dir.join("verdicts.jsonl");
    util::write_jsonl(&verdicts_path, &verdicts)?;
    let json = dir.join("summary.json");
    util::write_json(&json, &summary)?;
    let csv_path = dir.join("summary.csv");
    let mut w = util::csv_writer(&csv_path)?;
    w.write_record(["match", "incorrect", "missing", "total", "match_rate"])?;
    w.write_record([
        summary.matched.to_string(),
        summary.incorrect.to_string(),
        summary.missing.to_string(),
        summary.total.to_string(),
        frac(summary.match_rate),
    ])?;
    w.flush()?;
    for p in [verdicts_path, json, csv_path] {
        run.output(p);
    }
    eprintln!(
        "{} claims: {} match, {} incorrect, {} missing ({:.2}% match)",
        summary.total,
        summary.matched,
        summary.incorrect,
        summary.missing,
        summary.match_rate * 100.0
    );
    run.finish(&manifest::in_dir(dir), s, 0)?;
    Ok(Status::Success)
}
