use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use geofeed_core::analytics::{rfc_adherence_summaries, Rfc8805Summary};
use geofeed_core::geofeed::{decode_file_with, LineValidator};
use geofeed_core::iso3166::SubdivisionTable;
use geofeed_core::{validate_file, FileReport};
use geofeed_fetch::snapshot::{Snapshot, INDEX_FILE};
use geofeed_fetch::StatusKind;

use crate::config::Settings;
use crate::manifest::{self, Run};
use crate::{util, Status};

#[derive(Debug, clap::Args)]
pub struct Args {
    /// Snapshot directory from `fetch`, or a single geofeed file.
    pub input: PathBuf,
    /// Where to write reports.jsonl, reports.csv and summary.json. Without
    /// it the summary is printed.
    #[arg(long)]
    pub output_dir: Option<PathBuf>,
    /// Exit 1 when any line is malformed or any file is not UTF-8 with CRLF breaks.
    #[arg(long)]
    pub strict: bool,
    /// ISO 3166-2 code list (one code per line) for exact region checks.
    #[arg(long)]
    pub subdivisions: Option<PathBuf>,
}

pub fn run(args: Args, s: &mut Settings) -> Result<Status> {
    let mut run = Run::new("validate");
    let validator = match &args.subdivisions {
        Some(path) => {
            run.input(path);
            let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            LineValidator::new(SubdivisionTable::from_list(&text))
        }
        None => LineValidator::default(),
    };
    let reports = if args.input.is_dir() {
        run.input(args.input.join(INDEX_FILE));
        validate_snapshot(&args.input, &validator)?
    } else {
        run.input(&args.input);
        let raw = util::read_bytes(&args.input)?;
        vec![validate_file(&decode_file_with(&raw, &args.input.display().to_string(), &validator))]
    };
    let (_, summary) = rfc_adherence_summaries(&[], &reports);
    s.record("strict", args.strict);

    match &args.output_dir {
        Some(dir) => {
            let jsonl = dir.join("reports.jsonl");
            util::write_jsonl(&jsonl, &reports)?;
            let csv = dir.join("reports.csv");
            write_csv(&csv, &reports)?;
            let json = dir.join("summary.json");
            util::write_json(&json, &summary)?;
            for p in [jsonl, csv, json] {
                run.output(p);
            }
        }
        None => print!("{}", util::to_json(&summary)),
    }
    eprintln!(
        "{} files, {} lines: {} valid ({:.2}%), {} malformed; {} of {} files CRLF",
        summary.files,
        summary.lines,
        summary.valid,
        summary.valid_fraction * 100.0,
        summary.malformed,
        summary.crlf_files,
        summary.files
    );
    let status = if args.strict && has_violations(&summary) { Status::Failed } else { Status::Success };
    if let Some(dir) = &args.output_dir {
        run.finish(&manifest::in_dir(dir), s, status.code())?;
    }
    Ok(status)
}

fn has_violations(s: &Rfc8805Summary) -> bool {
    s.malformed > 0 || s.crlf_files < s.files || s.utf8_files < s.files
}

/// Reports for every successfully fetched body, ordered by URL.
fn validate_snapshot(dir: &Path, validator: &LineValidator) -> Result<Vec<FileReport>> {
    let snap = Snapshot::open(dir)?;
    let mut reports = Vec::new();
    for entry in snap.entries().filter(|e| e.status == StatusKind::Ok) {
        let body = snap.load_body(entry)?.context("snapshot entry without a body")?;
        reports.push(validate_file(&decode_file_with(&body, &entry.url, validator)));
    }
    Ok(reports)
}

fn write_csv(path: &Path, reports: &[FileReport]) -> Result<()> {
    let mut w = util::csv_writer(path)?;
    w.write_record([
        "url",
        "total",
        "valid",
        "malformed",
        "not_enough_fields",
        "malformed_ip_prefix",
        "malformed_country_code",
        "malformed_region_code",
        "extra_field_lines",
        "encoding_ok",
        "crlf_ok",
    ])?;
    for r in reports {
        let n = |x: u64| x.to_string();
        w.write_record([
            r.url.clone(),
            n(r.total),
            n(r.valid),
            n(r.malformed),
            n(r.reasons.not_enough_fields),
            n(r.reasons.malformed_ip_prefix),
            n(r.reasons.malformed_country_code),
            n(r.reasons.malformed_region_code),
            n(r.extra_field_lines),
            r.encoding_ok.to_string(),
            r.crlf_ok.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}
