//! Geofeed URL discovery inside registry records and the RFC 9092 checks.

use std::collections::BTreeSet;
use std::fmt;
use std::net::IpAddr;

use serde::{Deserialize, Serialize};

use crate::rpsl::{ObjectClass, Rir, RpslRecord};

/// Which attribute carried the URL.
///
/// ARIN `Comment:` lines are folded into `Remarks`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SourceAttribute {
    Remarks,
    #[serde(rename = "geofeed")]
    GeofeedAttr,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LocatorCheck {
    Valid,
    InvalidFormatting,
    NotHttps,
}

impl fmt::Display for LocatorCheck {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            LocatorCheck::Valid => "valid",
            LocatorCheck::InvalidFormatting => "invalid_formatting",
            LocatorCheck::NotHttps => "not_https",
        })
    }
}

/// Non-empty verdict set; `Valid` never shares the set with a failure.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "Vec<LocatorCheck>", into = "Vec<LocatorCheck>")]
pub struct LocatorVerdict(BTreeSet<LocatorCheck>);

impl LocatorVerdict {
    pub fn valid() -> Self {
        LocatorVerdict(BTreeSet::from([LocatorCheck::Valid]))
    }

    /// Builds the verdict from the failed checks; no failures means valid.
    pub fn from_failures(failures: impl IntoIterator<Item = LocatorCheck>) -> Self {
        let set: BTreeSet<_> = failures.into_iter().filter(|c| *c != LocatorCheck::Valid).collect();
        if set.is_empty() {
            Self::valid()
        } else {
            LocatorVerdict(set)
        }
    }

    pub fn is_valid(&self) -> bool {
        self.0.contains(&LocatorCheck::Valid)
    }

    pub fn contains(&self, check: LocatorCheck) -> bool {
        self.0.contains(&check)
    }

    pub fn checks(&self) -> impl Iterator<Item = LocatorCheck> + '_ {
        self.0.iter().copied()
    }
}

impl TryFrom<Vec<LocatorCheck>> for LocatorVerdict {
    type Error = String;

    fn try_from(v: Vec<LocatorCheck>) -> Result<Self, Self::Error> {
        let set: BTreeSet<_> = v.into_iter().collect();
        if set.is_empty() {
            return Err("empty verdict".into());
        }
        if set.contains(&LocatorCheck::Valid) && set.len() > 1 {
            return Err("valid verdict mixed with failures".into());
        }
        Ok(LocatorVerdict(set))
    }
}

impl From<LocatorVerdict> for Vec<LocatorCheck> {
    fn from(v: LocatorVerdict) -> Self {
        v.0.into_iter().collect()
    }
}

/// Identity of the registry object a locator came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct RecordRef {
    pub rir: Rir,
    pub index: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GeofeedLocator {
    pub url: String,
    pub source_attribute: SourceAttribute,
    pub record_ref: RecordRef,
    pub verdict: LocatorVerdict,
    /// The record carries both a `remarks: Geofeed` and a `geofeed:` locator.
    pub dual_source: bool,
}

const REMARKS_TOKEN: &str = "Geofeed";

/// Classifies one URL against the RFC 9092 publication templates.
///
/// `surrounding_text` is the attribute value, optionally still carrying its
/// `remarks:` / `comment:` / `geofeed:` key.
pub fn classify_locator(url: &str, source: SourceAttribute, surrounding_text: &str) -> LocatorVerdict {
    let keys: &[&str] = match source {
        SourceAttribute::Remarks => &["remarks", "comment"],
        SourceAttribute::GeofeedAttr => &["geofeed"],
    };
    let value = strip_key(surrounding_text.trim(), keys).trim();
    let template_ok = match source {
        SourceAttribute::Remarks => {
            value.strip_prefix(REMARKS_TOKEN).and_then(|rest| rest.strip_prefix(' ')).is_some_and(|rest| rest == url)
        }
        SourceAttribute::GeofeedAttr => value == url,
    };
    let mut failures = Vec::new();
    if !template_ok || !is_well_formed_url(url) {
        failures.push(LocatorCheck::InvalidFormatting);
    }
    if !url.starts_with("https://") {
        failures.push(LocatorCheck::NotHttps);
    }
    LocatorVerdict::from_failures(failures)
}

fn strip_key<'a>(text: &'a str, keys: &[&str]) -> &'a str {
    if let Some((key, rest)) = text.split_once(':') {
        if keys.iter().any(|k| key.eq_ignore_ascii_case(k)) {
            return rest;
        }
    }
    text
}

fn is_well_formed_url(url: &str) -> bool {
    if url.chars().any(char::is_whitespace) {
        return false;
    }
    url::Url::parse(url).is_ok_and(|u| u.host_str().is_some_and(|h| !h.is_empty()))
}

fn is_scheme_char(c: u8) -> bool {
    c.is_ascii_alphanumeric() || matches!(c, b'+' | b'-' | b'.')
}

/// Finds `scheme://...` substrings, each running to the next whitespace.
fn find_urls(text: &str) -> Vec<&str> {
    let bytes = text.as_bytes();
    let mut urls = Vec::new();
    let mut search = 0;
    while let Some(pos) = text[search..].find("://").map(|p| p + search) {
        let mut start = pos;
        while start > 0 && is_scheme_char(bytes[start - 1]) {
            start -= 1;
        }
        while start < pos && !bytes[start].is_ascii_alphabetic() {
            start += 1;
        }
        let end = text[pos..].find(char::is_whitespace).map_or(text.len(), |e| e + pos);
        if start < pos && end > pos + 3 {
            urls.push(&text[start..end]);
        }
        search = end.max(pos + 3);
    }
    urls
}

/// Extracts every geofeed locator in a record.
pub fn extract_locators(record: &RpslRecord) -> Vec<GeofeedLocator> {
    let record_ref = RecordRef { rir: record.source_rir, index: record.index };
    let mut found = Vec::new();
    for attr in &record.attributes {
        let source = match attr.key.as_str() {
            "remarks" | "comment" => SourceAttribute::Remarks,
            "geofeed" => SourceAttribute::GeofeedAttr,
            _ => continue,
        };
        let text = attr.text();
        let candidates = match source {
            SourceAttribute::Remarks => match text.to_ascii_lowercase().find("geofeed") {
                Some(at) => find_urls(&text[at..]),
                None => continue,
            },
            SourceAttribute::GeofeedAttr => find_urls(text),
        };
        for url in candidates {
            found.push(GeofeedLocator {
                url: url.to_string(),
                source_attribute: source,
                record_ref,
                verdict: classify_locator(url, source, text),
                dual_source: false,
            });
        }
    }
    let kinds: BTreeSet<_> = found.iter().map(|l| l.source_attribute).collect();
    if kinds.len() > 1 {
        for loc in &mut found {
            loc.dual_source = true;
        }
    }
    found
}

/// One line of the locator index (JSON lines).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LocatorIndexEntry {
    pub rir: Rir,
    pub object_class: ObjectClass,
    pub range_start: IpAddr,
    pub range_end: IpAddr,
    pub url: String,
    pub source_attribute: SourceAttribute,
    pub verdict: LocatorVerdict,
    pub record_index: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub origin_as: Option<u32>,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub dual_source: bool,
}

impl LocatorIndexEntry {
    pub fn new(record: &RpslRecord, locator: &GeofeedLocator) -> Self {
        LocatorIndexEntry {
            rir: record.source_rir,
            object_class: record.object_class,
            range_start: record.range.start,
            range_end: record.range.end,
            url: locator.url.clone(),
            source_attribute: locator.source_attribute,
            verdict: locator.verdict.clone(),
            record_index: record.index,
            origin_as: record.origin_as,
            dual_source: locator.dual_source,
        }
    }

    /// Key identifying the owning record across the index.
    pub fn record_key(&self) -> (Rir, usize, ObjectClass, IpAddr, IpAddr) {
        (self.rir, self.record_index, self.object_class, self.range_start, self.range_end)
    }
}

/// Index entries for every locator in `records`, in record order.
pub fn index_records<'a>(records: impl IntoIterator<Item = &'a RpslRecord>) -> Vec<LocatorIndexEntry> {
    records.into_iter().flat_map(|r| extract_locators(r).into_iter().map(move |l| LocatorIndexEntry::new(r, &l))).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rpsl::parse_rpsl_stream;

    fn remarks(value: &str) -> Vec<GeofeedLocator> {
        let text = format!("inetnum: 192.0.2.0 - 192.0.2.255\nremarks: {value}\n");
        let dump = parse_rpsl_stream(text.as_bytes(), Rir::Ripe).unwrap();
        extract_locators(&dump.records[0])
    }

    fn set(checks: &[LocatorCheck]) -> LocatorVerdict {
        LocatorVerdict::try_from(checks.to_vec()).unwrap()
    }

    #[test]
    fn valid_remarks() {
        let locs = remarks("Geofeed https://example.com/geofeed.csv");
        assert_eq!(locs.len(), 1);
        assert_eq!(locs[0].source_attribute, SourceAttribute::Remarks);
        assert_eq!(locs[0].verdict, LocatorVerdict::valid());
    }

    #[test]
    fn lowercase_token_is_invalid_formatting() {
        let locs = remarks("geofeed https://example.com/geofeed.csv");
        assert_eq!(locs.len(), 1);
        assert_eq!(locs[0].verdict, set(&[LocatorCheck::InvalidFormatting]));
    }

    #[test]
    fn http_is_not_https() {
        let locs = remarks("Geofeed http://example.com/geofeed.csv");
        assert_eq!(locs[0].verdict, set(&[LocatorCheck::NotHttps]));
    }

    #[test]
    fn classify_examples() {
        assert_eq!(
            classify_locator("https://example.com/geofeed.csv", SourceAttribute::GeofeedAttr, "geofeed: https://example.com/geofeed.csv"),
            LocatorVerdict::valid()
        );
        assert_eq!(
            classify_locator("http://x.example/g.csv", SourceAttribute::Remarks, "Geofeed http://x.example/g.csv extra-token"),
            set(&[LocatorCheck::InvalidFormatting, LocatorCheck::NotHttps])
        );
        assert_eq!(
            classify_locator("https://example.com/geofeed.csv", SourceAttribute::Remarks, "GEOFEED https://example.com/geofeed.csv"),
            set(&[LocatorCheck::InvalidFormatting])
        );
    }

    #[test]
    fn other_formatting_failures() {
        let bad = ["Geofeed: https://example.com/g.csv", "Geofeed  https://example.com/g.csv", "see Geofeed https://example.com/g.csv"];
        for text in bad {
            let locs = remarks(text);
            assert_eq!(locs.len(), 1, "{text}");
            assert_eq!(locs[0].verdict, set(&[LocatorCheck::InvalidFormatting]), "{text}");
        }
        assert_eq!(classify_locator("https://", SourceAttribute::GeofeedAttr, "https://"), set(&[LocatorCheck::InvalidFormatting]));
        assert_eq!(
            classify_locator("HTTPS://example.com/g.csv", SourceAttribute::GeofeedAttr, "HTTPS://example.com/g.csv"),
            set(&[LocatorCheck::NotHttps])
        );
    }

    #[test]
    fn no_mention_no_locator() {
        assert!(remarks("Operated by Example").is_empty());
        assert!(remarks("see https://example.com/geo.csv").is_empty());
        assert!(remarks("Geofeed coming soon").is_empty());
    }

    #[test]
    fn multiple_urls_reported_separately() {
        let locs = remarks("Geofeed https://a.example/1.csv https://b.example/2.csv");
        assert_eq!(locs.len(), 2);
        assert!(locs.iter().all(|l| l.verdict == set(&[LocatorCheck::InvalidFormatting])));
    }

    #[test]
    fn arin_comment_and_geofeed_attribute() {
        let text = "NetRange: 120.1.1.0 - 120.1.1.255\nComment: Geofeed https://a.example/g.csv\ngeofeed: https://b.example/g.csv\n";
        let dump = parse_rpsl_stream(text.as_bytes(), Rir::Arin).unwrap();
        let locs = extract_locators(&dump.records[0]);
        assert_eq!(locs.len(), 2);
        assert_eq!(locs[0].source_attribute, SourceAttribute::Remarks);
        assert_eq!(locs[1].source_attribute, SourceAttribute::GeofeedAttr);
        assert!(locs.iter().all(|l| l.verdict.is_valid() && l.dual_source));
    }

    #[test]
    fn index_entry_json_shape() {
        let text = "inetnum: 192.0.2.0 - 192.0.2.255\nremarks: Geofeed http://example.com/g.csv\n";
        let dump = parse_rpsl_stream(text.as_bytes(), Rir::Ripe).unwrap();
        let entries = index_records(&dump.records);
        let json = serde_json::to_value(&entries[0]).unwrap();
        assert_eq!(
            json,
            serde_json::json!({
                "rir": "RIPE",
                "object_class": "inetnum",
                "range_start": "192.0.2.0",
                "range_end": "192.0.2.255",
                "url": "http://example.com/g.csv",
                "source_attribute": "remarks",
                "verdict": ["not_https"],
                "record_index": 0
            })
        );
        let back: LocatorIndexEntry = serde_json::from_value(json).unwrap();
        assert_eq!(back, entries[0]);
    }

    #[test]
    fn verdict_rejects_invalid_sets() {
        assert!(LocatorVerdict::try_from(vec![]).is_err());
        assert!(LocatorVerdict::try_from(vec![LocatorCheck::Valid, LocatorCheck::NotHttps]).is_err());
    }
}
