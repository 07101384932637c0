//! Geofeed CSV decoding and the RFC 8805 line and file checks.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::iso3166::{is_alpha2, SubdivisionTable};
use crate::prefix::{parse_prefix, Prefix};

/// Why a data line is malformed. Variant order is check order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MalformedReason {
    NotEnoughFields,
    MalformedIpPrefix,
    MalformedCountryCode,
    MalformedRegionCode,
}

impl MalformedReason {
    pub const ALL: [MalformedReason; 4] = [
        MalformedReason::NotEnoughFields,
        MalformedReason::MalformedIpPrefix,
        MalformedReason::MalformedCountryCode,
        MalformedReason::MalformedRegionCode,
    ];
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum LineVerdict {
    Valid,
    /// Never empty.
    Malformed(BTreeSet<MalformedReason>),
}

impl LineVerdict {
    pub fn is_valid(&self) -> bool {
        matches!(self, LineVerdict::Valid)
    }

    pub fn reasons(&self) -> impl Iterator<Item = MalformedReason> + '_ {
        let set = match self {
            LineVerdict::Valid => None,
            LineVerdict::Malformed(set) => Some(set),
        };
        set.into_iter().flatten().copied()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GeofeedLine {
    pub line_number: usize,
    /// Line content without its terminator.
    pub raw: String,
    pub ip_prefix: Option<Prefix>,
    pub alpha2code: Option<String>,
    pub region: Option<String>,
    pub city: Option<String>,
    pub postal_code: Option<String>,
    /// Fields beyond the fifth. Tolerated, but recorded.
    pub extra_fields: usize,
    pub verdict: LineVerdict,
}

/// Line checks with a configurable subdivision table.
#[derive(Debug, Clone, Default)]
pub struct LineValidator {
    pub subdivisions: SubdivisionTable,
}

impl LineValidator {
    pub fn new(subdivisions: SubdivisionTable) -> Self {
        LineValidator { subdivisions }
    }

    pub fn validate(&self, line_number: usize, text: &str) -> GeofeedLine {
        let fields: Vec<&str> = text.split(',').collect();
        let field = |i: usize| fields.get(i).map(|s| s.to_string());
        let mut reasons = BTreeSet::new();

        if fields.len() < 5 {
            reasons.insert(MalformedReason::NotEnoughFields);
        }
        let ip_prefix = parse_prefix(fields[0]).ok();
        if ip_prefix.is_none() {
            reasons.insert(MalformedReason::MalformedIpPrefix);
        }
        let country = fields.get(1).copied().unwrap_or("");
        if !country.is_empty() && !is_alpha2(country) {
            reasons.insert(MalformedReason::MalformedCountryCode);
        }
        if let Some(region) = fields.get(2).filter(|r| !r.is_empty()) {
            if !self.subdivisions.is_valid(region, country) {
                reasons.insert(MalformedReason::MalformedRegionCode);
            }
        }

        GeofeedLine {
            line_number,
            raw: text.to_string(),
            ip_prefix,
            alpha2code: field(1),
            region: field(2),
            city: field(3),
            postal_code: field(4),
            extra_fields: fields.len().saturating_sub(5),
            verdict: if reasons.is_empty() { LineVerdict::Valid } else { LineVerdict::Malformed(reasons) },
        }
    }
}

/// Validates one data line (terminator already stripped) with default rules.
pub fn validate_line(line_number: usize, text: &str) -> GeofeedLine {
    LineValidator::default().validate(line_number, text)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GeofeedFile {
    pub source_url: String,
    /// Hex SHA-256 of the raw bytes.
    pub raw_bytes_digest: String,
    pub encoding_ok: bool,
    pub crlf_ok: bool,
    pub lines: Vec<GeofeedLine>,
    pub comment_count: usize,
    pub blank_count: usize,
}

impl GeofeedFile {
    pub fn physical_lines(&self) -> usize {
        self.comment_count + self.blank_count + self.lines.len()
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex_lower(&Sha256::digest(bytes))
}

pub(crate) fn hex_lower(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

/// True when every line break in `raw` is CRLF.
pub fn all_crlf(raw: &[u8]) -> bool {
    raw.iter().enumerate().all(|(i, &b)| match b {
        b'\n' => i > 0 && raw[i - 1] == b'\r',
        b'\r' => raw.get(i + 1) == Some(&b'\n'),
        _ => true,
    })
}

/// Splits on CRLF, LF or bare CR. A trailing terminator does not start a new line.
pub fn split_lines(text: &str) -> Vec<&str> {
    let bytes = text.as_bytes();
    let mut lines = Vec::new();
    let mut start = 0;
    let mut i = 0;
    while i < bytes.len() {
        match bytes[i] {
            b'\r' => {
                lines.push(&text[start..i]);
                i += if bytes.get(i + 1) == Some(&b'\n') { 2 } else { 1 };
                start = i;
            }
            b'\n' => {
                lines.push(&text[start..i]);
                i += 1;
                start = i;
            }
            _ => i += 1,
        }
    }
    if start < bytes.len() {
        lines.push(&text[start..]);
    }
    lines
}

/// Decodes raw geofeed bytes. Invalid UTF-8 is replaced so that line checks
/// still run, and reported through `encoding_ok`.
pub fn decode_file(raw: &[u8], source_url: &str) -> GeofeedFile {
    decode_file_with(raw, source_url, &LineValidator::default())
}

pub fn decode_file_with(raw: &[u8], source_url: &str, validator: &LineValidator) -> GeofeedFile {
    let encoding_ok = std::str::from_utf8(raw).is_ok();
    let text = String::from_utf8_lossy(raw);
    let mut file = GeofeedFile {
        source_url: source_url.to_string(),
        raw_bytes_digest: sha256_hex(raw),
        encoding_ok,
        crlf_ok: all_crlf(raw),
        lines: Vec::new(),
        comment_count: 0,
        blank_count: 0,
    };
    for (i, line) in split_lines(&text).into_iter().enumerate() {
        if line.is_empty() {
            file.blank_count += 1;
        } else if line.starts_with('#') {
            file.comment_count += 1;
        } else {
            file.lines.push(validator.validate(i + 1, line));
        }
    }
    file
}

/// Per-reason counters.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReasonCounts {
    pub not_enough_fields: u64,
    pub malformed_ip_prefix: u64,
    pub malformed_country_code: u64,
    pub malformed_region_code: u64,
}

impl ReasonCounts {
    pub fn bump(&mut self, reason: MalformedReason) {
        *self.slot(reason) += 1;
    }

    pub fn get(&self, reason: MalformedReason) -> u64 {
        match reason {
            MalformedReason::NotEnoughFields => self.not_enough_fields,
            MalformedReason::MalformedIpPrefix => self.malformed_ip_prefix,
            MalformedReason::MalformedCountryCode => self.malformed_country_code,
            MalformedReason::MalformedRegionCode => self.malformed_region_code,
        }
    }

    fn slot(&mut self, reason: MalformedReason) -> &mut u64 {
        match reason {
            MalformedReason::NotEnoughFields => &mut self.not_enough_fields,
            MalformedReason::MalformedIpPrefix => &mut self.malformed_ip_prefix,
            MalformedReason::MalformedCountryCode => &mut self.malformed_country_code,
            MalformedReason::MalformedRegionCode => &mut self.malformed_region_code,
        }
    }

    pub fn add(&mut self, other: &ReasonCounts) {
        for r in MalformedReason::ALL {
            *self.slot(r) += other.get(r);
        }
    }

    pub fn total(&self) -> u64 {
        MalformedReason::ALL.iter().map(|r| self.get(*r)).sum()
    }
}

/// Line statistics for one geofeed file.
///
/// `reasons` counts every failed check (a line with two failures bumps two
/// counters); `primary_reasons` attributes each malformed line to its first
/// failed check, so it sums to `malformed`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileReport {
    pub url: String,
    pub total: u64,
    pub valid: u64,
    pub malformed: u64,
    pub reasons: ReasonCounts,
    pub primary_reasons: ReasonCounts,
    pub extra_field_lines: u64,
    pub encoding_ok: bool,
    pub crlf_ok: bool,
}

pub fn validate_file(file: &GeofeedFile) -> FileReport {
    let mut report = FileReport {
        url: file.source_url.clone(),
        total: 0,
        valid: 0,
        malformed: 0,
        reasons: ReasonCounts::default(),
        primary_reasons: ReasonCounts::default(),
        extra_field_lines: 0,
        encoding_ok: file.encoding_ok,
        crlf_ok: file.crlf_ok,
    };
    for line in &file.lines {
        report.total += 1;
        if line.extra_fields > 0 {
            report.extra_field_lines += 1;
        }
        match &line.verdict {
            LineVerdict::Valid => report.valid += 1,
            LineVerdict::Malformed(reasons) => {
                report.malformed += 1;
                for r in reasons {
                    report.reasons.bump(*r);
                }
                if let Some(first) = reasons.first() {
                    report.primary_reasons.bump(*first);
                }
            }
        }
    }
    report
}
