//! IP prefixes in strict CIDR form and sorted, nesting-free prefix sets.

use std::cmp::Ordering;
use std::fmt;
use std::net::{IpAddr, Ipv4Addr, Ipv6Addr};
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

/// Address family.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Family {
    V4,
    V6,
}

impl Family {
    pub fn bits(self) -> u8 {
        match self {
            Family::V4 => 32,
            Family::V6 => 128,
        }
    }

    pub fn of(addr: &IpAddr) -> Self {
        match addr {
            IpAddr::V4(_) => Family::V4,
            IpAddr::V6(_) => Family::V6,
        }
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Family::V4 => "ipv4",
            Family::V6 => "ipv6",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum PrefixError {
    #[error("empty prefix")]
    Empty,
    #[error("invalid address {0:?}")]
    BadAddress(String),
    #[error("invalid prefix length {0:?}")]
    BadLength(String),
    #[error("host bits set below /{len} in {text:?}")]
    HostBitsSet { text: String, len: u8 },
}

/// A canonical IP prefix. Bits below the mask are always zero.
///
/// Field order gives the `(family, base, length)` sort order used by
/// [`PrefixSet`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Prefix {
    family: Family,
    bits: u128,
    len: u8,
}

fn mask(family: Family, len: u8) -> u128 {
    if len == 0 {
        return 0;
    }
    (u128::MAX << (128 - len as u32)) >> (128 - family.bits() as u32)
}

fn addr_bits(addr: &IpAddr) -> u128 {
    match addr {
        IpAddr::V4(a) => u32::from(*a) as u128,
        IpAddr::V6(a) => u128::from(*a),
    }
}

#[allow(clippy::len_without_is_empty)]
impl Prefix {
    /// Builds a prefix, failing when host bits are set or the length is too long.
    pub fn new(addr: IpAddr, len: u8) -> Result<Self, PrefixError> {
        let family = Family::of(&addr);
        if len > family.bits() {
            return Err(PrefixError::BadLength(len.to_string()));
        }
        let bits = addr_bits(&addr);
        if bits & !mask(family, len) != 0 {
            return Err(PrefixError::HostBitsSet { text: format!("{addr}/{len}"), len });
        }
        Ok(Prefix { family, bits, len })
    }

    /// Builds a prefix by clearing host bits.
    pub fn truncating(addr: IpAddr, len: u8) -> Self {
        let family = Family::of(&addr);
        let len = len.min(family.bits());
        Prefix { family, bits: addr_bits(&addr) & mask(family, len), len }
    }

    /// A single-address prefix (/32 or /128).
    pub fn host(addr: IpAddr) -> Self {
        let family = Family::of(&addr);
        Prefix { family, bits: addr_bits(&addr), len: family.bits() }
    }

    pub fn family(&self) -> Family {
        self.family
    }

    pub fn len(&self) -> u8 {
        self.len
    }

    pub fn base(&self) -> IpAddr {
        self.addr_from_bits(self.bits)
    }

    /// Highest address covered by the prefix.
    pub fn last(&self) -> IpAddr {
        self.addr_from_bits(self.last_bits())
    }

    pub(crate) fn last_bits(&self) -> u128 {
        self.bits | (!mask(self.family, self.len) & mask(self.family, self.family.bits()))
    }

    fn addr_from_bits(&self, bits: u128) -> IpAddr {
        match self.family {
            Family::V4 => IpAddr::V4(Ipv4Addr::from(bits as u32)),
            Family::V6 => IpAddr::V6(Ipv6Addr::from(bits)),
        }
    }

    pub fn contains_addr(&self, addr: &IpAddr) -> bool {
        Family::of(addr) == self.family && addr_bits(addr) & mask(self.family, self.len) == self.bits
    }

    /// True when `other` is equal to or nested inside `self`.
    pub fn contains(&self, other: &Prefix) -> bool {
        self.family == other.family && self.len <= other.len && other.bits & mask(self.family, self.len) == self.bits
    }

    pub fn overlaps(&self, other: &Prefix) -> bool {
        self.contains(other) || other.contains(self)
    }
}

/// Parses a geofeed `ip_prefix` field: a bare address or strict CIDR.
pub fn parse_prefix(text: &str) -> Result<Prefix, PrefixError> {
    if text.is_empty() {
        return Err(PrefixError::Empty);
    }
    let (addr_text, len_text) = match text.split_once('/') {
        Some((a, l)) => (a, Some(l)),
        None => (text, None),
    };
    let addr = IpAddr::from_str(addr_text).map_err(|_| PrefixError::BadAddress(addr_text.to_string()))?;
    let Some(len_text) = len_text else {
        return Ok(Prefix::host(addr));
    };
    let well_formed = !len_text.is_empty()
        && len_text.len() <= 3
        && len_text.bytes().all(|b| b.is_ascii_digit())
        && !(len_text.len() > 1 && len_text.starts_with('0'));
    if !well_formed {
        return Err(PrefixError::BadLength(len_text.to_string()));
    }
    let len: u8 = len_text.parse().map_err(|_| PrefixError::BadLength(len_text.to_string()))?;
    if len > Family::of(&addr).bits() {
        return Err(PrefixError::BadLength(len_text.to_string()));
    }
    Prefix::new(addr, len).map_err(|e| match e {
        PrefixError::HostBitsSet { len, .. } => PrefixError::HostBitsSet { text: text.to_string(), len },
        other => other,
    })
}

impl FromStr for Prefix {
    type Err = PrefixError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        parse_prefix(s)
    }
}

impl fmt::Display for Prefix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.base(), self.len)
    }
}

impl Serialize for Prefix {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Prefix {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let text = String::deserialize(d)?;
        parse_prefix(&text).map_err(serde::de::Error::custom)
    }
}

/// A sorted set of prefixes in which no member contains another.
///
/// Nested input prefixes collapse into their covering member at construction.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash)]
pub struct PrefixSet {
    prefixes: Vec<Prefix>,
}

impl PrefixSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn as_slice(&self) -> &[Prefix] {
        &self.prefixes
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Prefix> {
        self.prefixes.iter()
    }

    pub fn len(&self) -> usize {
        self.prefixes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.prefixes.is_empty()
    }

    /// Index of the last member whose base sorts at or before `(family, bits)`.
    fn floor(&self, family: Family, bits: u128) -> Option<&Prefix> {
        let idx = self.prefixes.partition_point(|p| (p.family, p.bits).cmp(&(family, bits)) != Ordering::Greater);
        idx.checked_sub(1).map(|i| &self.prefixes[i])
    }

    pub fn contains_addr(&self, addr: &IpAddr) -> bool {
        self.floor(Family::of(addr), addr_bits(addr)).is_some_and(|p| p.contains_addr(addr))
    }

    /// True when some member covers `prefix`.
    pub fn contains(&self, prefix: &Prefix) -> bool {
        self.covering(prefix).is_some()
    }

    pub fn covering(&self, prefix: &Prefix) -> Option<&Prefix> {
        self.floor(prefix.family, prefix.bits).filter(|p| p.contains(prefix))
    }

    /// True when every member of `self` is covered by `other`.
    pub fn is_subset(&self, other: &PrefixSet) -> bool {
        self.prefixes.iter().all(|p| other.contains(p))
    }

    /// Comma-separated rendering in set order.
    pub fn render(&self) -> String {
        self.prefixes.iter().map(|p| p.to_string()).collect::<Vec<_>>().join(",")
    }
}

impl FromIterator<Prefix> for PrefixSet {
    fn from_iter<I: IntoIterator<Item = Prefix>>(iter: I) -> Self {
        let mut all: Vec<Prefix> = iter.into_iter().collect();
        all.sort();
        all.dedup();
        let mut prefixes: Vec<Prefix> = Vec::with_capacity(all.len());
        for p in all {
            // Sorted order puts a container before everything it covers, so the
            // last kept member is the only candidate container.
            if prefixes.last().is_some_and(|k| k.contains(&p)) {
                continue;
            }
            prefixes.push(p);
        }
        PrefixSet { prefixes }
    }
}

impl<'a> IntoIterator for &'a PrefixSet {
    type Item = &'a Prefix;
    type IntoIter = std::slice::Iter<'a, Prefix>;

    fn into_iter(self) -> Self::IntoIter {
        self.prefixes.iter()
    }
}

impl fmt::Display for PrefixSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.render())
    }
}

impl Serialize for PrefixSet {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        self.prefixes.serialize(s)
    }
}

impl<'de> Deserialize<'de> for PrefixSet {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        Ok(Vec::<Prefix>::deserialize(d)?.into_iter().collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(s: &str) -> Prefix {
        s.parse().unwrap()
    }

    #[test]
    fn parses_cidr() {
        let pfx = p("120.0.0.0/8");
        assert_eq!(pfx.family(), Family::V4);
        assert_eq!(pfx.base(), "120.0.0.0".parse::<IpAddr>().unwrap());
        assert_eq!(pfx.len(), 8);
    }

    #[test]
    fn bare_address_gets_full_length() {
        assert_eq!(p("1.2.3.4").len(), 32);
        assert_eq!(p("2001:db8::1").len(), 128);
        assert_eq!(p("1.2.3.4").to_string(), "1.2.3.4/32");
    }

    #[test]
    fn rejects_malformed() {
        assert_eq!(parse_prefix(""), Err(PrefixError::Empty));
        assert!(matches!(parse_prefix("2001:db8::/129"), Err(PrefixError::BadLength(_))));
        assert!(matches!(parse_prefix("10.0.0.1/24"), Err(PrefixError::HostBitsSet { .. })));
        assert!(matches!(parse_prefix("999.1.1.0/24"), Err(PrefixError::BadAddress(_))));
        assert!(matches!(parse_prefix("10.0.0.0/"), Err(PrefixError::BadLength(_))));
        assert!(matches!(parse_prefix("10.0.0.0/+8"), Err(PrefixError::BadLength(_))));
        assert!(matches!(parse_prefix("10.0.0.0/08"), Err(PrefixError::BadLength(_))));
        assert!(matches!(parse_prefix(" 10.0.0.0/8"), Err(PrefixError::BadAddress(_))));
        assert!(matches!(parse_prefix("10.0.0.0/33"), Err(PrefixError::BadLength(_))));
    }

    #[test]
    fn zero_and_full_lengths() {
        assert_eq!(p("0.0.0.0/0").last(), "255.255.255.255".parse::<IpAddr>().unwrap());
        assert_eq!(p("::/0").last(), "ffff:ffff:ffff:ffff:ffff:ffff:ffff:ffff".parse::<IpAddr>().unwrap());
        assert!(p("::/0").contains(&p("2001:db8::/32")));
        assert!(!p("0.0.0.0/0").contains(&p("2001:db8::/32")));
        assert_eq!(p("255.255.255.255/32").last(), "255.255.255.255".parse::<IpAddr>().unwrap());
    }

    #[test]
    fn containment() {
        assert!(p("120.0.0.0/8").contains(&p("120.1.1.0/24")));
        assert!(!p("120.1.1.0/24").contains(&p("120.0.0.0/8")));
        assert!(!p("120.0.0.0/8").contains(&p("121.0.0.0/24")));
    }

    #[test]
    fn set_collapses_nested_members() {
        let set: PrefixSet =
            ["120.1.1.0/24", "120.0.0.0/8", "10.0.0.0/8", "2001:db8::/32", "2001:db8:1::/48"].iter().map(|s| p(s)).collect();
        assert_eq!(set.render(), "10.0.0.0/8,120.0.0.0/8,2001:db8::/32");
        assert!(set.contains(&p("120.1.1.0/24")));
        assert!(!set.contains(&p("121.0.0.0/8")));
        assert!(set.contains_addr(&"2001:db8:ffff::1".parse().unwrap()));
        assert!(!set.contains_addr(&"2001:db9::1".parse().unwrap()));
    }

    #[test]
    fn subset() {
        let big: PrefixSet = [p("120.0.0.0/8")].into_iter().collect();
        let small: PrefixSet = [p("120.1.1.0/24")].into_iter().collect();
        assert!(small.is_subset(&big));
        assert!(!big.is_subset(&small));
        assert!(PrefixSet::new().is_subset(&small));
    }
}
