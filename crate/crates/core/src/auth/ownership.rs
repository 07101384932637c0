//! Prefix ownership comparison against secondary sources (RPKI snapshots,
//! AS-info providers).

use std::collections::{BTreeSet, HashMap};
use std::fmt;
use std::io::BufRead;

use serde::{Deserialize, Serialize};

use crate::prefix::{Family, Prefix};
use crate::rpsl::parse_asn;

/// A normalized owner identity. AS numbers compare numerically, names
/// compare case-insensitively after trimming.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Owner {
    Asn(u32),
    Name(String),
}

impl Owner {
    pub fn normalize(text: &str) -> Owner {
        let t = text.trim();
        match parse_asn(t) {
            Some(n) => Owner::Asn(n),
            None => Owner::Name(t.to_lowercase()),
        }
    }
}

impl fmt::Display for Owner {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Owner::Asn(n) => write!(f, "AS{n}"),
            Owner::Name(s) => f.write_str(s),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MatchRule {
    /// The most specific source record covering the claimed prefix decides.
    #[default]
    Covering,
    /// Only a source record for exactly the claimed prefix counts.
    Exact,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum SourceError {
    #[error("ownership source unavailable: {0}")]
    SourceUnavailable(String),
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
}

/// Answers "who owns this prefix" for ownership comparison.
pub trait OwnershipSource {
    /// Owners of the deciding record, empty when nothing matches.
    fn owners(&self, prefix: &Prefix, rule: MatchRule) -> Result<Vec<Owner>, SourceError>;
}

/// In-memory prefix → owner table, used by the file fixtures.
#[derive(Debug, Clone, Default)]
pub struct OwnerTable {
    entries: HashMap<Prefix, BTreeSet<Owner>>,
    lengths: [BTreeSet<u8>; 2],
}

fn family_slot(f: Family) -> usize {
    match f {
        Family::V4 => 0,
        Family::V6 => 1,
    }
}

#[derive(Deserialize)]
struct RpkiRow {
    prefix: Prefix,
    #[allow(dead_code)]
    max_length: Option<u8>,
    asn: serde_json::Value,
}

#[derive(Deserialize)]
struct ProviderRow {
    prefix: Prefix,
    owner: String,
}

impl OwnerTable {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, prefix: Prefix, owner: Owner) {
        self.lengths[family_slot(prefix.family())].insert(prefix.len());
        self.entries.entry(prefix).or_default().insert(owner);
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Loads an RPKI snapshot: one JSON object `{prefix, max_length, asn}`
    /// per line. `asn` may be a number or an `AS`-prefixed string.
    pub fn from_rpki_jsonl(reader: impl BufRead) -> Result<Self, SourceError> {
        let mut table = OwnerTable::new();
        for_each_row(reader, |line, row: RpkiRow| {
            let owner = match &row.asn {
                serde_json::Value::Number(n) => n.as_u64().and_then(|n| u32::try_from(n).ok()).map(Owner::Asn),
                serde_json::Value::String(s) => parse_asn(s).map(Owner::Asn),
                _ => None,
            }
            .ok_or_else(|| SourceError::Parse { line, message: format!("bad asn {}", row.asn) })?;
            table.insert(row.prefix, owner);
            Ok(())
        })?;
        Ok(table)
    }

    /// Loads a provider fixture: one JSON object `{prefix, owner}` per line.
    pub fn from_provider_jsonl(reader: impl BufRead) -> Result<Self, SourceError> {
        let mut table = OwnerTable::new();
        for_each_row(reader, |_, row: ProviderRow| {
            table.insert(row.prefix, Owner::normalize(&row.owner));
            Ok(())
        })?;
        Ok(table)
    }
}

fn for_each_row<T: for<'de> Deserialize<'de>>(
    reader: impl BufRead,
    mut f: impl FnMut(usize, T) -> Result<(), SourceError>,
) -> Result<(), SourceError> {
    for (i, line) in reader.lines().enumerate() {
        let line_no = i + 1;
        let line = line.map_err(|e| SourceError::SourceUnavailable(e.to_string()))?;
        if line.trim().is_empty() {
            continue;
        }
        let row = serde_json::from_str(&line).map_err(|e| SourceError::Parse { line: line_no, message: e.to_string() })?;
        f(line_no, row)?;
    }
    Ok(())
}

impl OwnershipSource for OwnerTable {
    fn owners(&self, prefix: &Prefix, rule: MatchRule) -> Result<Vec<Owner>, SourceError> {
        let hit = match rule {
            MatchRule::Exact => self.entries.get(prefix),
            MatchRule::Covering => self.lengths[family_slot(prefix.family())]
                .range(..=prefix.len())
                .rev()
                .find_map(|&l| self.entries.get(&Prefix::truncating(prefix.base(), l))),
        };
        Ok(hit.map(|s| s.iter().cloned().collect()).unwrap_or_default())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OwnershipClaim {
    pub prefix: Prefix,
    #[serde(alias = "owner")]
    pub claimed_owner: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "verdict", rename_all = "snake_case")]
pub enum Verdict {
    Match,
    Incorrect { found_owner: String },
    Missing,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct OwnershipVerdict {
    pub prefix: Prefix,
    pub claimed_owner: String,
    #[serde(flatten)]
    pub verdict: Verdict,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct CountSummary {
    #[serde(rename = "match")]
    pub matched: u64,
    pub incorrect: u64,
    pub missing: u64,
    pub total: u64,
    /// `matched / total`, 0 for an empty comparison.
    pub match_rate: f64,
}

impl CountSummary {
    pub fn from_verdicts<'a>(verdicts: impl IntoIterator<Item = &'a OwnershipVerdict>) -> Self {
        let mut s = CountSummary::default();
        for v in verdicts {
            match v.verdict {
                Verdict::Match => s.matched += 1,
                Verdict::Incorrect { .. } => s.incorrect += 1,
                Verdict::Missing => s.missing += 1,
            }
            s.total += 1;
        }
        s.match_rate = if s.total == 0 { 0.0 } else { s.matched as f64 / s.total as f64 };
        s
    }
}

pub fn compare_ownership(
    claims: &[OwnershipClaim],
    source: &dyn OwnershipSource,
    rule: MatchRule,
) -> Result<(Vec<OwnershipVerdict>, CountSummary), SourceError> {
    let mut verdicts = Vec::with_capacity(claims.len());
    for claim in claims {
        let claimed = Owner::normalize(&claim.claimed_owner);
        let owners = source.owners(&claim.prefix, rule)?;
        let verdict = if owners.contains(&claimed) {
            Verdict::Match
        } else if let Some(found) = owners.first() {
            Verdict::Incorrect { found_owner: found.to_string() }
        } else {
            Verdict::Missing
        };
        verdicts.push(OwnershipVerdict { prefix: claim.prefix, claimed_owner: claim.claimed_owner.clone(), verdict });
    }
    let summary = CountSummary::from_verdicts(&verdicts);
    Ok((verdicts, summary))
}
