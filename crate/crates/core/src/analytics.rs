//! Adoption, adherence and distribution statistics over a locator index and
//! a set of validated geofeed files.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::io::BufRead;

use serde::{Deserialize, Serialize};

use crate::geofeed::{FileReport, GeofeedLine, ReasonCounts};
use crate::locator::{LocatorCheck, LocatorIndexEntry};
use crate::prefix::Family;
use crate::rpsl::{ObjectClass, Rir};

fn ratio(n: u64, d: u64) -> f64 {
    if d == 0 {
        0.0
    } else {
        n as f64 / d as f64
    }
}

/// Total registry objects per RIR, the denominators of adoption fractions.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RecordTotals {
    /// What the counts cover, e.g. "all inetnum/inet6num objects in the
    /// published dump".
    pub denominator: String,
    pub rirs: BTreeMap<Rir, ClassTotals>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassTotals {
    pub inetnum: u64,
    pub inet6num: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum AnalyticsError {
    #[error("no record totals for {0}")]
    MissingTotals(Rir),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AdoptionRow {
    pub rir: Rir,
    pub inetnum_count: u64,
    /// Geofeed-bearing inetnums over all inetnums of this RIR.
    pub inetnum_fraction: f64,
    /// This RIR's part of all geofeed-bearing inetnums.
    pub inetnum_share: f64,
    pub inet6num_count: u64,
    pub inet6num_fraction: f64,
    pub inet6num_share: f64,
    pub as_count: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AdoptionTotals {
    pub inetnum_count: u64,
    pub inetnum_fraction: f64,
    pub inet6num_count: u64,
    pub inet6num_fraction: f64,
    /// Distinct ASes over all RIRs.
    pub as_count: u64,
    /// Sum of the per-RIR AS column, which double counts ASes that appear
    /// under several RIRs.
    pub as_count_column_sum: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AdoptionTable {
    pub rows: Vec<AdoptionRow>,
    pub totals: AdoptionTotals,
    pub denominator: String,
}

/// `NetRange` objects count as inetnums.
fn is_v4_class(c: ObjectClass) -> bool {
    matches!(c, ObjectClass::Inetnum | ObjectClass::NetRange)
}

/// Distinct origin ASes of geofeed-bearing records, per RIR.
pub fn ases_per_rir(entries: &[LocatorIndexEntry]) -> BTreeMap<Rir, BTreeSet<u32>> {
    let mut out: BTreeMap<Rir, BTreeSet<u32>> = BTreeMap::new();
    for e in entries {
        if let Some(asn) = e.origin_as {
            out.entry(e.rir).or_default().insert(asn);
        }
    }
    out
}

/// Table of geofeed-bearing records per RIR. Every RIR in [`Rir::ALL`] gets
/// a row and needs totals.
pub fn rir_adoption_stats(entries: &[LocatorIndexEntry], totals: &RecordTotals) -> Result<AdoptionTable, AnalyticsError> {
    let mut records: HashMap<Rir, (BTreeSet<_>, BTreeSet<_>)> = HashMap::new();
    for e in entries {
        let slot = records.entry(e.rir).or_default();
        if is_v4_class(e.object_class) {
            slot.0.insert(e.record_key());
        } else {
            slot.1.insert(e.record_key());
        }
    }
    let ases = ases_per_rir(entries);

    let mut counts = Vec::new();
    for rir in Rir::ALL {
        let t = totals.rirs.get(&rir).ok_or(AnalyticsError::MissingTotals(rir))?;
        let (v4, v6) = records.get(&rir).map(|(a, b)| (a.len() as u64, b.len() as u64)).unwrap_or((0, 0));
        let as_count = ases.get(&rir).map_or(0, |s| s.len() as u64);
        counts.push((rir, *t, v4, v6, as_count));
    }
    let sum_v4: u64 = counts.iter().map(|c| c.2).sum();
    let sum_v6: u64 = counts.iter().map(|c| c.3).sum();
    let rows = counts
        .iter()
        .map(|&(rir, t, v4, v6, as_count)| AdoptionRow {
            rir,
            inetnum_count: v4,
            inetnum_fraction: ratio(v4, t.inetnum),
            inetnum_share: ratio(v4, sum_v4),
            inet6num_count: v6,
            inet6num_fraction: ratio(v6, t.inet6num),
            inet6num_share: ratio(v6, sum_v6),
            as_count,
        })
        .collect();
    let all_ases: BTreeSet<u32> = ases.values().flatten().copied().collect();
    let totals_row = AdoptionTotals {
        inetnum_count: sum_v4,
        inetnum_fraction: ratio(sum_v4, counts.iter().map(|c| c.1.inetnum).sum()),
        inet6num_count: sum_v6,
        inet6num_fraction: ratio(sum_v6, counts.iter().map(|c| c.1.inet6num).sum()),
        as_count: all_ases.len() as u64,
        as_count_column_sum: counts.iter().map(|c| c.4).sum(),
    };
    Ok(AdoptionTable { rows, totals: totals_row, denominator: totals.denominator.clone() })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum AsCategory {
    #[serde(rename = "ISP", alias = "isp")]
    Isp,
    #[serde(alias = "business")]
    Business,
    #[serde(alias = "hosting")]
    Hosting,
    #[serde(alias = "education")]
    Education,
    #[serde(alias = "unknown")]
    Unknown,
}

impl AsCategory {
    pub const ALL: [AsCategory; 5] =
        [AsCategory::Isp, AsCategory::Business, AsCategory::Hosting, AsCategory::Education, AsCategory::Unknown];

    pub fn as_str(self) -> &'static str {
        match self {
            AsCategory::Isp => "ISP",
            AsCategory::Business => "Business",
            AsCategory::Hosting => "Hosting",
            AsCategory::Education => "Education",
            AsCategory::Unknown => "Unknown",
        }
    }

    /// Maps provider labels such as "isp", "business" or "edu" onto a
    /// category. Anything unrecognized is Unknown.
    pub fn from_label(label: &str) -> AsCategory {
        match label.trim().to_ascii_lowercase().as_str() {
            "isp" => AsCategory::Isp,
            "business" => AsCategory::Business,
            "hosting" => AsCategory::Hosting,
            "education" | "edu" => AsCategory::Education,
            _ => AsCategory::Unknown,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("AS info lookup failed: {0}")]
pub struct ProviderError(pub String);

/// Resolves an AS number to its category.
pub trait AsInfoProvider {
    fn category(&self, asn: u32) -> Result<AsCategory, ProviderError>;
}

/// File-backed provider: JSON lines `{asn, category}`.
#[derive(Debug, Clone, Default)]
pub struct CategoryTable {
    map: HashMap<u32, AsCategory>,
}

#[derive(Deserialize)]
struct CategoryRow {
    asn: u32,
    category: String,
}

impl CategoryTable {
    pub fn insert(&mut self, asn: u32, category: AsCategory) {
        self.map.insert(asn, category);
    }

    pub fn from_jsonl(reader: impl BufRead) -> Result<Self, String> {
        let mut t = CategoryTable::default();
        for (i, line) in reader.lines().enumerate() {
            let line = line.map_err(|e| e.to_string())?;
            if line.trim().is_empty() {
                continue;
            }
            let row: CategoryRow = serde_json::from_str(&line).map_err(|e| format!("line {}: {e}", i + 1))?;
            t.insert(row.asn, AsCategory::from_label(&row.category));
        }
        Ok(t)
    }
}

impl AsInfoProvider for CategoryTable {
    fn category(&self, asn: u32) -> Result<AsCategory, ProviderError> {
        self.map.get(&asn).copied().ok_or_else(|| ProviderError(format!("AS{asn} not in fixture")))
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct CategoryBreakdown {
    pub per_rir: BTreeMap<Rir, BTreeMap<AsCategory, u64>>,
    /// Sum over RIRs. An AS listed under two RIRs counts twice.
    pub overall: BTreeMap<AsCategory, u64>,
}

impl CategoryBreakdown {
    /// Categories by descending overall count, ties in declaration order.
    pub fn overall_ranking(&self) -> Vec<AsCategory> {
        let mut cats: Vec<AsCategory> = AsCategory::ALL.to_vec();
        cats.sort_by_key(|c| std::cmp::Reverse(self.overall.get(c).copied().unwrap_or(0)));
        cats
    }
}

pub fn as_category_breakdown(ases: &BTreeMap<Rir, BTreeSet<u32>>, provider: &dyn AsInfoProvider) -> CategoryBreakdown {
    let mut out = CategoryBreakdown::default();
    for (rir, set) in ases {
        let hist = out.per_rir.entry(*rir).or_default();
        for asn in set {
            let cat = provider.category(*asn).unwrap_or(AsCategory::Unknown);
            *hist.entry(cat).or_default() += 1;
            *out.overall.entry(cat).or_default() += 1;
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Rfc9092Summary {
    pub records: u64,
    pub locators: u64,
    /// Records whose every locator is Valid.
    pub valid: u64,
    /// Records with at least one locator failing the check.
    pub invalid_formatting: u64,
    pub not_https: u64,
    pub valid_fraction: f64,
    pub invalid_formatting_fraction: f64,
    pub not_https_fraction: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Rfc8805Summary {
    pub files: u64,
    pub lines: u64,
    pub valid: u64,
    pub malformed: u64,
    pub valid_fraction: f64,
    pub malformed_fraction: f64,
    pub reasons: ReasonCounts,
    pub primary_reasons: ReasonCounts,
    pub extra_field_lines: u64,
    pub crlf_files: u64,
    pub crlf_fraction: f64,
    pub utf8_files: u64,
    pub utf8_fraction: f64,
}

/// Locator adherence counted per inet[6]num, and line/file adherence
/// aggregated over file reports.
pub fn rfc_adherence_summaries(entries: &[LocatorIndexEntry], reports: &[FileReport]) -> (Rfc9092Summary, Rfc8805Summary) {
    let mut per_record: HashMap<_, BTreeSet<LocatorCheck>> = HashMap::new();
    for e in entries {
        per_record.entry(e.record_key()).or_default().extend(e.verdict.checks());
    }
    let records = per_record.len() as u64;
    let count = |check: LocatorCheck| per_record.values().filter(|s| s.contains(&check)).count() as u64;
    let valid = per_record.values().filter(|s| s.iter().all(|c| *c == LocatorCheck::Valid)).count() as u64;
    let invalid_formatting = count(LocatorCheck::InvalidFormatting);
    let not_https = count(LocatorCheck::NotHttps);
    let s9092 = Rfc9092Summary {
        records,
        locators: entries.len() as u64,
        valid,
        invalid_formatting,
        not_https,
        valid_fraction: ratio(valid, records),
        invalid_formatting_fraction: ratio(invalid_formatting, records),
        not_https_fraction: ratio(not_https, records),
    };

    let mut reasons = ReasonCounts::default();
    let mut primary = ReasonCounts::default();
    let (mut lines, mut ok, mut bad, mut extra, mut crlf, mut utf8) = (0, 0, 0, 0, 0, 0);
    for r in reports {
        lines += r.total;
        ok += r.valid;
        bad += r.malformed;
        extra += r.extra_field_lines;
        crlf += r.crlf_ok as u64;
        utf8 += r.encoding_ok as u64;
        reasons.add(&r.reasons);
        primary.add(&r.primary_reasons);
    }
    let files = reports.len() as u64;
    let s8805 = Rfc8805Summary {
        files,
        lines,
        valid: ok,
        malformed: bad,
        valid_fraction: ratio(ok, lines),
        malformed_fraction: ratio(bad, lines),
        reasons,
        primary_reasons: primary,
        extra_field_lines: extra,
        crlf_files: crlf,
        crlf_fraction: ratio(crlf, files),
        utf8_files: utf8,
        utf8_fraction: ratio(utf8, files),
    };
    (s9092, s8805)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HistogramFilters {
    /// Keep only IPv6 lengths divisible by 4. Ignored for IPv4.
    pub v6_lengths_multiple_of_4: bool,
    /// Keep countries holding at least this fraction of the family's lines.
    pub country_min_share: f64,
}

impl Default for HistogramFilters {
    fn default() -> Self {
        HistogramFilters { v6_lengths_multiple_of_4: true, country_min_share: 0.05 }
    }
}

impl HistogramFilters {
    pub fn none() -> Self {
        HistogramFilters { v6_lengths_multiple_of_4: false, country_min_share: 0.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct HistogramCell {
    pub country: String,
    pub length: u8,
    pub count: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PrefixHistogram {
    pub family: Family,
    pub filters: HistogramFilters,
    /// Valid lines of this family before filtering.
    pub total: u64,
    pub cells: Vec<HistogramCell>,
}

impl PrefixHistogram {
    pub fn cell_sum(&self) -> u64 {
        self.cells.iter().map(|c| c.count).sum()
    }

    /// Counts per prefix length over all kept countries.
    pub fn by_length(&self) -> BTreeMap<u8, u64> {
        let mut out = BTreeMap::new();
        for c in &self.cells {
            *out.entry(c.length).or_default() += c.count;
        }
        out
    }

    /// Most common length, the shortest on ties.
    pub fn argmax_length(&self) -> Option<u8> {
        let by = self.by_length();
        let best = by.values().copied().max()?;
        by.into_iter().find(|(_, n)| *n == best).map(|(l, _)| l)
    }
}

/// Counts valid lines of `family` by (country, prefix length).
///
/// Country shares are taken over every valid line of the family before the
/// length filter, so filtering lengths never moves a country across the
/// threshold.
pub fn prefix_length_histogram<'a>(
    lines: impl IntoIterator<Item = &'a GeofeedLine>,
    family: Family,
    filters: HistogramFilters,
) -> PrefixHistogram {
    let mut cells: BTreeMap<(String, u8), u64> = BTreeMap::new();
    let mut per_country: BTreeMap<String, u64> = BTreeMap::new();
    let mut total = 0u64;
    for line in lines {
        let Some(p) = line.ip_prefix.filter(|p| line.verdict.is_valid() && p.family() == family) else {
            continue;
        };
        let country = line.alpha2code.clone().unwrap_or_default();
        total += 1;
        *per_country.entry(country.clone()).or_default() += 1;
        *cells.entry((country, p.len())).or_default() += 1;
    }
    let cells = cells
        .into_iter()
        .filter(|((country, len), _)| {
            let share_ok = ratio(per_country[country], total) >= filters.country_min_share;
            let len_ok = !(family == Family::V6 && filters.v6_lengths_multiple_of_4) || len % 4 == 0;
            share_ok && len_ok
        })
        .map(|((country, length), count)| HistogramCell { country, length, count })
        .collect();
    PrefixHistogram { family, filters, total, cells }
}

/// Valid lines per country code. Lines without a country land under "".
pub fn country_prefix_counts<'a>(lines: impl IntoIterator<Item = &'a GeofeedLine>) -> BTreeMap<String, u64> {
    let mut out = BTreeMap::new();
    for line in lines.into_iter().filter(|l| l.verdict.is_valid()) {
        *out.entry(line.alpha2code.clone().unwrap_or_default()).or_default() += 1;
    }
    out
}

/// Country with the most lines, ignoring the empty key. Ties go to the
/// alphabetically first code.
pub fn argmax_country(counts: &BTreeMap<String, u64>) -> Option<&str> {
    let best = counts.iter().filter(|(k, _)| !k.is_empty()).map(|(_, v)| *v).max()?;
    counts.iter().find(|(k, v)| !k.is_empty() && **v == best).map(|(k, _)| k.as_str())
}
