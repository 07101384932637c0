//! RPSL registry dumps: `inetnum`, `inet6num` and ARIN `NetRange` objects.
//!
//! Records are blank-line separated groups of `key: value` attributes.
//! Continuation lines (leading space, tab or `+`) extend the previous
//! attribute value. `%` and `#` lines outside an attribute are comments.

use std::fmt;
use std::io::BufRead;
use std::net::IpAddr;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::prefix::{parse_prefix, Family};

/// Regional Internet Registry.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Rir {
    Afrinic,
    Apnic,
    Arin,
    Lacnic,
    Ripe,
}

impl Rir {
    pub const ALL: [Rir; 5] = [Rir::Afrinic, Rir::Apnic, Rir::Arin, Rir::Lacnic, Rir::Ripe];

    pub fn as_str(self) -> &'static str {
        match self {
            Rir::Afrinic => "AFRINIC",
            Rir::Apnic => "APNIC",
            Rir::Arin => "ARIN",
            Rir::Lacnic => "LACNIC",
            Rir::Ripe => "RIPE",
        }
    }
}

impl fmt::Display for Rir {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("unknown RIR {0:?}")]
pub struct UnknownRir(pub String);

impl FromStr for Rir {
    type Err = UnknownRir;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_uppercase().replace([' ', '-', '_'], "").as_str() {
            "AFRINIC" => Ok(Rir::Afrinic),
            "APNIC" => Ok(Rir::Apnic),
            "ARIN" => Ok(Rir::Arin),
            "LACNIC" => Ok(Rir::Lacnic),
            "RIPE" | "RIPENCC" => Ok(Rir::Ripe),
            _ => Err(UnknownRir(s.to_string())),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ObjectClass {
    Inetnum,
    Inet6num,
    NetRange,
}

impl ObjectClass {
    fn from_key(key: &str) -> Option<Self> {
        match key {
            "inetnum" => Some(ObjectClass::Inetnum),
            "inet6num" => Some(ObjectClass::Inet6num),
            "netrange" => Some(ObjectClass::NetRange),
            _ => None,
        }
    }

    pub fn family(self) -> Family {
        match self {
            ObjectClass::Inetnum | ObjectClass::NetRange => Family::V4,
            ObjectClass::Inet6num => Family::V6,
        }
    }
}

impl fmt::Display for ObjectClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ObjectClass::Inetnum => "inetnum",
            ObjectClass::Inet6num => "inet6num",
            ObjectClass::NetRange => "netrange",
        })
    }
}

/// Inclusive address range of one registry object.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct IpRange {
    pub start: IpAddr,
    pub end: IpAddr,
}

impl IpRange {
    pub fn family(&self) -> Family {
        Family::of(&self.start)
    }
}

/// One attribute line (plus any continuation lines).
///
/// `value` is everything after the colon, byte for byte, including alignment
/// whitespace and embedded continuation line breaks.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Attribute {
    pub key: String,
    pub raw_key: String,
    pub value: String,
}

impl Attribute {
    /// Value with alignment whitespace removed.
    pub fn text(&self) -> &str {
        self.value.trim()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RpslRecord {
    /// 0-based position of the record among the stream's records, including
    /// records that failed to parse.
    pub index: usize,
    pub object_class: ObjectClass,
    pub range: IpRange,
    pub attributes: Vec<Attribute>,
    pub source_rir: Rir,
    pub origin_as: Option<u32>,
}

impl RpslRecord {
    pub fn values<'a>(&'a self, key: &'a str) -> impl Iterator<Item = &'a Attribute> + 'a {
        self.attributes.iter().filter(move |a| a.key == key)
    }

    /// Renders the record back to RPSL text.
    pub fn to_rpsl(&self) -> String {
        let mut out = String::new();
        for attr in &self.attributes {
            out.push_str(&attr.raw_key);
            out.push(':');
            out.push_str(&attr.value);
            out.push('\n');
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum RpslError {
    #[error("empty RPSL stream")]
    EmptyStream,
    #[error("record {index}: cannot parse range {text:?}")]
    RangeParseError { index: usize, text: String },
    #[error("I/O error: {0}")]
    Io(String),
}

/// Output of [`parse_rpsl_stream`]: good records plus per-record failures.
#[derive(Debug, Clone, Default)]
pub struct RpslDump {
    pub records: Vec<RpslRecord>,
    pub errors: Vec<RpslError>,
}

/// Parses a whole in-memory dump.
pub fn parse_rpsl_stream(input: &[u8], rir: Rir) -> Result<RpslDump, RpslError> {
    if input.iter().all(|b| b.is_ascii_whitespace()) {
        return Err(RpslError::EmptyStream);
    }
    let mut dump = RpslDump::default();
    for item in RpslReader::new(input, rir) {
        match item {
            Ok(rec) => dump.records.push(rec),
            Err(e @ RpslError::Io(_)) => return Err(e),
            Err(e) => dump.errors.push(e),
        }
    }
    Ok(dump)
}

/// Streaming record reader over any buffered source.
///
/// Objects of other classes (`person`, `route`, ...) are skipped.
pub struct RpslReader<R> {
    input: R,
    rir: Rir,
    next_index: usize,
    line: Vec<u8>,
    done: bool,
}

impl<R: BufRead> RpslReader<R> {
    pub fn new(input: R, rir: Rir) -> Self {
        RpslReader { input, rir, next_index: 0, line: Vec::new(), done: false }
    }

    /// Collects the raw attributes of the next object, or `None` at EOF.
    fn next_block(&mut self) -> Result<Option<Vec<Attribute>>, RpslError> {
        let mut attrs: Vec<Attribute> = Vec::new();
        loop {
            self.line.clear();
            let n = self.input.read_until(b'\n', &mut self.line).map_err(|e| RpslError::Io(e.to_string()))?;
            if n == 0 {
                return Ok((!attrs.is_empty()).then_some(attrs));
            }
            let text = String::from_utf8_lossy(&self.line);
            let text = text.strip_suffix('\n').unwrap_or(&text);
            let text = text.strip_suffix('\r').unwrap_or(text);
            if text.trim().is_empty() {
                if attrs.is_empty() {
                    continue;
                }
                return Ok(Some(attrs));
            }
            let first = text.as_bytes()[0];
            if matches!(first, b' ' | b'\t' | b'+') {
                if let Some(last) = attrs.last_mut() {
                    last.value.push('\n');
                    last.value.push_str(text);
                }
                continue;
            }
            if matches!(first, b'%' | b'#') {
                continue;
            }
            match text.split_once(':') {
                Some((key, value)) if is_attribute_key(key) => {
                    attrs.push(Attribute { key: key.to_ascii_lowercase(), raw_key: key.to_string(), value: value.to_string() })
                }
                // Not an attribute line; keep it with the previous value so no
                // text is dropped from the record.
                _ => {
                    if let Some(last) = attrs.last_mut() {
                        last.value.push('\n');
                        last.value.push_str(text);
                    }
                }
            }
        }
    }
}

fn is_attribute_key(key: &str) -> bool {
    !key.is_empty() && key.bytes().all(|b| b.is_ascii_alphanumeric() || b == b'-' || b == b'_')
}

impl<R: BufRead> Iterator for RpslReader<R> {
    type Item = Result<RpslRecord, RpslError>;

    fn next(&mut self) -> Option<Self::Item> {
        while !self.done {
            let attrs = match self.next_block() {
                Ok(Some(attrs)) => attrs,
                Ok(None) => {
                    self.done = true;
                    return None;
                }
                Err(e) => {
                    self.done = true;
                    return Some(Err(e));
                }
            };
            let Some(class) = ObjectClass::from_key(&attrs[0].key) else {
                continue;
            };
            let index = self.next_index;
            self.next_index += 1;
            let range_text = attrs[0].text().to_string();
            let Some(range) = parse_range(&range_text, class.family()) else {
                return Some(Err(RpslError::RangeParseError { index, text: range_text }));
            };
            let origin_as =
                attrs.iter().filter(|a| matches!(a.key.as_str(), "originas" | "origin-as" | "origin")).find_map(|a| parse_asn(a.text()));
            return Some(Ok(RpslRecord { index, object_class: class, range, attributes: attrs, source_rir: self.rir, origin_as }));
        }
        None
    }
}

/// Parses `a - b` ranges and CIDR notation.
fn parse_range(text: &str, family: Family) -> Option<IpRange> {
    let range = if let Some((a, b)) = text.split_once('-') {
        let start: IpAddr = a.trim().parse().ok()?;
        let end: IpAddr = b.trim().parse().ok()?;
        IpRange { start, end }
    } else {
        let prefix = parse_prefix(text.trim()).ok()?;
        IpRange { start: prefix.base(), end: prefix.last() }
    };
    let ordered = match (range.start, range.end) {
        (IpAddr::V4(a), IpAddr::V4(b)) => a <= b,
        (IpAddr::V6(a), IpAddr::V6(b)) => a <= b,
        _ => false,
    };
    (ordered && range.family() == family).then_some(range)
}

/// Accepts `AS64500`, `as64500` and `64500`. ARIN lists several origins
/// separated by commas or spaces; the first one wins.
pub fn parse_asn(text: &str) -> Option<u32> {
    let first = text.split([',', ' ', '\t']).find(|t| !t.is_empty())?;
    let digits = first.strip_prefix("AS").or_else(|| first.strip_prefix("as")).unwrap_or(first);
    if digits.is_empty() || !digits.bytes().all(|b| b.is_ascii_digit()) {
        return None;
    }
    digits.parse().ok()
}
