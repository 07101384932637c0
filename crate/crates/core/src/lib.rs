//! Geofeed discovery, adherence checking, adoption analytics and scoped
//! signature chains for geofeed publishers.

pub mod analytics;
pub mod auth;
pub mod geofeed;
pub mod iso3166;
pub mod locator;
pub mod prefix;
pub mod rpsl;

pub use geofeed::{decode_file, validate_file, validate_line, FileReport, GeofeedFile, GeofeedLine, LineVerdict, MalformedReason};
pub use locator::{classify_locator, extract_locators, GeofeedLocator, LocatorCheck, LocatorIndexEntry, LocatorVerdict, SourceAttribute};
pub use prefix::{parse_prefix, Family, Prefix, PrefixError, PrefixSet};
pub use rpsl::{parse_rpsl_stream, ObjectClass, Rir, RpslError, RpslReader, RpslRecord};
