use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use geofeed_core::analytics::{
    argmax_country, as_category_breakdown, ases_per_rir, country_prefix_counts, prefix_length_histogram, rfc_adherence_summaries,
    rir_adoption_stats, AdoptionTable, AsCategory, CategoryBreakdown, CategoryTable, HistogramFilters, PrefixHistogram, RecordTotals,
    Rfc8805Summary, Rfc9092Summary,
};
use geofeed_core::geofeed::ReasonCounts;
use geofeed_core::{decode_file, Family, FileReport, GeofeedLine, LocatorIndexEntry, MalformedReason, Rir};
use geofeed_fetch::snapshot::{Snapshot, INDEX_FILE};
use geofeed_fetch::StatusKind;
use serde::Serialize;

use crate::config::Settings;
use crate::manifest::{self, Run};
use crate::util::{self, frac};
use crate::Status;

#[derive(Debug, clap::Args)]
pub struct Args {
    /// Locator index from `discover`.
    #[arg(long)]
    pub index: PathBuf,
    /// File reports (reports.jsonl from `validate`), for the RFC 8805 summary.
    #[arg(long)]
    pub reports: Option<PathBuf>,
    /// Per-RIR total record counts (JSON), for the adoption table.
    #[arg(long)]
    pub totals: Option<PathBuf>,
    /// AS categories as JSON lines `{asn, category}`, for the category breakdown.
    #[arg(long)]
    pub as_info: Option<PathBuf>,
    /// Snapshot directory, for country counts and prefix-length heatmaps.
    #[arg(long)]
    pub snapshot: Option<PathBuf>,
    /// Heatmap country threshold as a fraction of the RIR's lines [default: 0.05]
    #[arg(long, env = "GEOFEED_COUNTRY_MIN_SHARE")]
    pub country_min_share: Option<f64>,
    /// Keep IPv6 lengths that are not multiples of 4 [default: false]
    #[arg(long, env = "GEOFEED_ALL_V6_LENGTHS", num_args = 0..=1, default_missing_value = "true")]
    pub all_v6_lengths: Option<bool>,
    #[arg(long)]
    pub output_dir: PathBuf,
}

/// Label of the all-registries group in per-RIR outputs.
const ALL: &str = "ALL";

pub fn run(args: Args, s: &mut Settings) -> Result<Status> {
    let mut run = Run::new("report");
    let dir = &args.output_dir;
    run.input(&args.index);
    let entries: Vec<LocatorIndexEntry> = util::read_jsonl(&args.index)?;

    let reports: Vec<FileReport> = match &args.reports {
        Some(p) => {
            run.input(p);
            util::read_jsonl(p)?
        }
        None => Vec::new(),
    };
    let (s9092, s8805) = rfc_adherence_summaries(&entries, &reports);
    emit(&mut run, dir, "rfc9092", &s9092, |p| rfc9092_csv(p, &s9092))?;
    if args.reports.is_some() {
        emit(&mut run, dir, "rfc8805", &s8805, |p| rfc8805_csv(p, &s8805))?;
    }

    if let Some(p) = &args.totals {
        run.input(p);
        let totals: RecordTotals = util::read_json(p)?;
        let table = rir_adoption_stats(&entries, &totals)?;
        emit(&mut run, dir, "adoption", &table, |p| adoption_csv(p, &table))?;
    }

    if let Some(p) = &args.as_info {
        run.input(p);
        let table = CategoryTable::from_jsonl(util::open_text(p)?)
            .map_err(anyhow::Error::msg)
            .with_context(|| format!("parsing {}", p.display()))?;
        let breakdown = as_category_breakdown(&ases_per_rir(&entries), &table);
        let ranked = Ranked { ranking: breakdown.overall_ranking(), breakdown: &breakdown };
        emit(&mut run, dir, "as_categories", &ranked, |p| categories_csv(p, &breakdown))?;
    }

    if let Some(snap_dir) = &args.snapshot {
        run.input(snap_dir.join(INDEX_FILE));
        let filters = HistogramFilters {
            v6_lengths_multiple_of_4: !s.get("all-v6-lengths", args.all_v6_lengths, false)?,
            country_min_share: s.get("country-min-share", args.country_min_share, HistogramFilters::default().country_min_share)?,
        };
        let groups = lines_by_rir(snap_dir, &entries)?;
        let appendix = Appendix::build(&groups, filters);
        emit(&mut run, dir, "appendix", &appendix, |p| heatmap_csv(p, &appendix))?;
        let countries = dir.join("countries.csv");
        countries_csv(&countries, &appendix)?;
        run.output(countries);
    }

    eprintln!(
        "{} records with locators: {:.2}% valid, {:.2}% invalid formatting, {:.2}% not https",
        s9092.records,
        s9092.valid_fraction * 100.0,
        s9092.invalid_formatting_fraction * 100.0,
        s9092.not_https_fraction * 100.0
    );
    run.finish(&manifest::in_dir(dir), s, 0)?;
    Ok(Status::Success)
}

/// Writes `<name>.json` and `<name>.csv`.
fn emit<T: Serialize>(run: &mut Run, dir: &Path, name: &str, value: &T, csv: impl FnOnce(&Path) -> Result<()>) -> Result<()> {
    let json = dir.join(format!("{name}.json"));
    util::write_json(&json, value)?;
    run.output(json);
    let csv_path = dir.join(format!("{name}.csv"));
    csv(&csv_path)?;
    run.output(csv_path);
    Ok(())
}

fn adoption_csv(path: &Path, t: &AdoptionTable) -> Result<()> {
    let mut w = util::csv_writer(path)?;
    w.write_record([
        "rir",
        "inetnum_count",
        "inetnum_fraction",
        "inetnum_share",
        "inet6num_count",
        "inet6num_fraction",
        "inet6num_share",
        "as_count",
    ])?;
    for r in &t.rows {
        w.write_record([
            r.rir.as_str().to_string(),
            r.inetnum_count.to_string(),
            frac(r.inetnum_fraction),
            frac(r.inetnum_share),
            r.inet6num_count.to_string(),
            frac(r.inet6num_fraction),
            frac(r.inet6num_share),
            r.as_count.to_string(),
        ])?;
    }
    let tt = &t.totals;
    w.write_record([
        "TOTAL".to_string(),
        tt.inetnum_count.to_string(),
        frac(tt.inetnum_fraction),
        frac(1.0),
        tt.inet6num_count.to_string(),
        frac(tt.inet6num_fraction),
        frac(1.0),
        tt.as_count.to_string(),
    ])?;
    w.flush()?;
    Ok(())
}

#[derive(Serialize)]
struct Ranked<'a> {
    ranking: Vec<AsCategory>,
    #[serde(flatten)]
    breakdown: &'a CategoryBreakdown,
}

fn categories_csv(path: &Path, b: &CategoryBreakdown) -> Result<()> {
    let mut w = util::csv_writer(path)?;
    w.write_record(["rir", "category", "count"])?;
    let rows = b.per_rir.iter().map(|(r, h)| (r.as_str(), h)).chain([(ALL, &b.overall)]);
    for (rir, hist) in rows {
        for c in AsCategory::ALL {
            w.write_record([rir, c.as_str(), &hist.get(&c).copied().unwrap_or(0).to_string()])?;
        }
    }
    w.flush()?;
    Ok(())
}

fn metric_csv(path: &Path, rows: &[(&str, u64, f64)]) -> Result<()> {
    let mut w = util::csv_writer(path)?;
    w.write_record(["metric", "count", "fraction"])?;
    for (name, n, f) in rows {
        w.write_record([name.to_string(), n.to_string(), frac(*f)])?;
    }
    w.flush()?;
    Ok(())
}

fn ratio(n: u64, d: u64) -> f64 {
    if d == 0 {
        0.0
    } else {
        n as f64 / d as f64
    }
}

fn rfc9092_csv(path: &Path, s: &Rfc9092Summary) -> Result<()> {
    metric_csv(
        path,
        &[
            ("records", s.records, 1.0),
            ("valid", s.valid, s.valid_fraction),
            ("invalid_formatting", s.invalid_formatting, s.invalid_formatting_fraction),
            ("not_https", s.not_https, s.not_https_fraction),
        ],
    )
}

fn reason_rows(prefix: &str, counts: &ReasonCounts, lines: u64) -> Vec<(String, u64, f64)> {
    MalformedReason::ALL
        .iter()
        .map(|r| {
            let n = counts.get(*r);
            (format!("{prefix}{}", reason_name(*r)), n, ratio(n, lines))
        })
        .collect()
}

fn reason_name(r: MalformedReason) -> &'static str {
    match r {
        MalformedReason::NotEnoughFields => "not_enough_fields",
        MalformedReason::MalformedIpPrefix => "malformed_ip_prefix",
        MalformedReason::MalformedCountryCode => "malformed_country_code",
        MalformedReason::MalformedRegionCode => "malformed_region_code",
    }
}

fn rfc8805_csv(path: &Path, s: &Rfc8805Summary) -> Result<()> {
    let mut rows: Vec<(String, u64, f64)> = vec![
        ("lines".into(), s.lines, 1.0),
        ("valid".into(), s.valid, s.valid_fraction),
        ("malformed".into(), s.malformed, s.malformed_fraction),
    ];
    rows.extend(reason_rows("reason:", &s.reasons, s.lines));
    rows.extend(reason_rows("primary_reason:", &s.primary_reasons, s.lines));
    rows.push(("extra_field_lines".into(), s.extra_field_lines, ratio(s.extra_field_lines, s.lines)));
    rows.push(("files".into(), s.files, 1.0));
    rows.push(("crlf_files".into(), s.crlf_files, s.crlf_fraction));
    rows.push(("utf8_files".into(), s.utf8_files, s.utf8_fraction));
    let borrowed: Vec<(&str, u64, f64)> = rows.iter().map(|(a, b, c)| (a.as_str(), *b, *c)).collect();
    metric_csv(path, &borrowed)
}

/// Valid lines of every fetched file, grouped under each RIR whose index
/// lists the file's URL, and under [`ALL`].
fn lines_by_rir(snap_dir: &Path, entries: &[LocatorIndexEntry]) -> Result<BTreeMap<String, Vec<GeofeedLine>>> {
    let mut rirs_of: BTreeMap<&str, BTreeSet<Rir>> = BTreeMap::new();
    for e in entries {
        rirs_of.entry(e.url.as_str()).or_default().insert(e.rir);
    }
    let snap = Snapshot::open(snap_dir)?;
    let mut groups: BTreeMap<String, Vec<GeofeedLine>> = BTreeMap::new();
    for entry in snap.entries().filter(|e| e.status == StatusKind::Ok) {
        let body = snap.load_body(entry)?.context("snapshot entry without a body")?;
        let valid: Vec<GeofeedLine> = decode_file(&body, &entry.url).lines.into_iter().filter(|l| l.verdict.is_valid()).collect();
        for rir in rirs_of.get(entry.url.as_str()).into_iter().flatten() {
            groups.entry(rir.as_str().to_string()).or_default().extend(valid.iter().cloned());
        }
        groups.entry(ALL.to_string()).or_default().extend(valid);
    }
    Ok(groups)
}

#[derive(Serialize)]
struct GroupStats {
    countries: BTreeMap<String, u64>,
    top_country: Option<String>,
    v4: PrefixHistogram,
    v4_top_length: Option<u8>,
    v6: PrefixHistogram,
    v6_top_length: Option<u8>,
}

#[derive(Serialize)]
struct Appendix {
    groups: BTreeMap<String, GroupStats>,
}

impl Appendix {
    fn build(groups: &BTreeMap<String, Vec<GeofeedLine>>, filters: HistogramFilters) -> Appendix {
        let groups = groups
            .iter()
            .map(|(name, lines)| {
                let countries = country_prefix_counts(lines);
                let v4 = prefix_length_histogram(lines, Family::V4, filters);
                let v6 = prefix_length_histogram(lines, Family::V6, filters);
                let stats = GroupStats {
                    top_country: argmax_country(&countries).map(str::to_string),
                    countries,
                    v4_top_length: v4.argmax_length(),
                    v6_top_length: v6.argmax_length(),
                    v4,
                    v6,
                };
                (name.clone(), stats)
            })
            .collect();
        Appendix { groups }
    }
}

fn heatmap_csv(path: &Path, a: &Appendix) -> Result<()> {
    let mut w = util::csv_writer(path)?;
    w.write_record(["rir", "family", "country", "length", "count"])?;
    for (rir, g) in &a.groups {
        for (family, h) in [("v4", &g.v4), ("v6", &g.v6)] {
            for c in &h.cells {
                w.write_record([rir.as_str(), family, &c.country, &c.length.to_string(), &c.count.to_string()])?;
            }
        }
    }
    w.flush()?;
    Ok(())
}

fn countries_csv(path: &Path, a: &Appendix) -> Result<()> {
    let mut w = util::csv_writer(path)?;
    w.write_record(["rir", "country", "count"])?;
    for (rir, g) in &a.groups {
        for (country, n) in &g.countries {
            w.write_record([rir.as_str(), country, &n.to_string()])?;
        }
    }
    w.flush()?;
    Ok(())
}
