//! Two-step geofeed authentication.
//!
//! Publishers are authenticated through a certificate hierarchy in which
//! every certificate names the prefixes its holder may speak for. Geofeed
//! data is authenticated with detached signatures over a *scope*: the subset
//! of a file's lines whose prefixes fall inside a prefix set. Signatures can
//! be countersigned by parties further up the delegation hierarchy.

pub mod bundle;
pub mod cert;
pub mod demo;
pub mod identity;
pub mod ownership;
pub mod scope;
pub mod simulate;
pub mod verify;

pub use bundle::{countersign, sign_scope, ChainElement, CountersignTarget, FileRef, SignError, SignedGeofeedBundle, Target};
pub use cert::{issue_certificate, self_signed, CertRole, Certificate, CertificateRequest, IssueError, Serial, Validity};
pub use identity::{generate_identity, Identity, IdentityFile, PublicKeyFile, VerificationKey, ED25519};
pub use ownership::{
    compare_ownership, CountSummary, MatchRule, Owner, OwnerTable, OwnershipClaim, OwnershipSource, OwnershipVerdict, SourceError, Verdict,
};
pub use scope::{canonicalize_scope, ScopeError, SignatureScope};
pub use verify::{verify_bundle, CertificateStore, ElementFailure, ElementResult, TrustLevel, VerificationReport, VerifyError};

/// Digest algorithm identifier recorded in envelopes.
pub const SHA256: &str = "sha-256";

pub(crate) mod b64 {
    use base64::engine::general_purpose::STANDARD;
    use base64::Engine;
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(bytes: &[u8], s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&STANDARD.encode(bytes))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<u8>, D::Error> {
        let text = String::deserialize(d)?;
        STANDARD.decode(text.as_bytes()).map_err(serde::de::Error::custom)
    }

    pub mod option {
        use super::*;

        pub fn serialize<S: Serializer>(bytes: &Option<Vec<u8>>, s: S) -> Result<S::Ok, S::Error> {
            match bytes {
                Some(b) => s.serialize_some(&STANDARD.encode(b)),
                None => s.serialize_none(),
            }
        }

        pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<Vec<u8>>, D::Error> {
            Option::<String>::deserialize(d)?.map(|t| STANDARD.decode(t.as_bytes()).map_err(serde::de::Error::custom)).transpose()
        }
    }
}
