//! ISO 3166-1 alpha-2 lookup and ISO 3166-2 subdivision checks.

use std::collections::BTreeSet;
use std::sync::OnceLock;

const ALPHA2_DATA: &str = include_str!("../data/iso3166-1-alpha2.txt");

fn alpha2_table() -> &'static BTreeSet<&'static str> {
    static TABLE: OnceLock<BTreeSet<&'static str>> = OnceLock::new();
    TABLE.get_or_init(|| parse_code_list(ALPHA2_DATA).collect())
}

fn parse_code_list(data: &str) -> impl Iterator<Item = &str> {
    data.lines().map(str::trim).filter(|l| !l.is_empty() && !l.starts_with('#'))
}

/// Exact, case-sensitive lookup in the bundled alpha-2 table.
pub fn is_alpha2(code: &str) -> bool {
    alpha2_table().contains(code)
}

pub fn alpha2_codes() -> impl Iterator<Item = &'static str> {
    alpha2_table().iter().copied()
}

/// Subdivision rules. The default applies a shape check only; loading a
/// subdivision list adds exact membership.
#[derive(Debug, Clone, Default)]
pub struct SubdivisionTable {
    codes: Option<BTreeSet<String>>,
}

impl SubdivisionTable {
    /// Loads one code per line (`US-CA`); `#` lines are comments.
    pub fn from_list(data: &str) -> Self {
        SubdivisionTable { codes: Some(parse_code_list(data).map(str::to_string).collect()) }
    }

    /// `CC-XXX` shape with a known `CC`, matching `country` when it is non-empty.
    pub fn is_valid(&self, region: &str, country: &str) -> bool {
        let Some((cc, sub)) = region.split_once('-') else {
            return false;
        };
        let shape = cc.len() == 2
            && cc.bytes().all(|b| b.is_ascii_uppercase())
            && (1..=3).contains(&sub.len())
            && sub.bytes().all(|b| b.is_ascii_uppercase() || b.is_ascii_digit());
        if !shape || !is_alpha2(cc) {
            return false;
        }
        if !country.is_empty() && cc != country {
            return false;
        }
        self.codes.as_ref().is_none_or(|codes| codes.contains(region))
    }
}
