use std::fmt;
use std::str::FromStr;

use chrono::{DateTime, SubsecRound, Utc};
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use sha2::{Digest, Sha256};

use super::b64;
use super::identity::{Identity, VerificationKey};
use crate::prefix::{Prefix, PrefixSet};

/// Certificate serial number, rendered as 16 hex digits.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Serial(pub u64);

impl fmt::Display for Serial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:016x}", self.0)
    }
}

impl FromStr for Serial {
    type Err = std::num::ParseIntError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        u64::from_str_radix(s, 16).map(Serial)
    }
}

impl Serialize for Serial {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Serial {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        String::deserialize(d)?.parse().map_err(serde::de::Error::custom)
    }
}

/// What a certificate holder may do besides publishing.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CertRole {
    /// Certificate or registration authority. May attest (countersign)
    /// signatures over prefixes it does not hold.
    Authority,
    /// Address holder (RIR, ISP, end network). Every delegation and
    /// countersignature must stay inside its authorized prefixes.
    Holder,
}

impl fmt::Display for CertRole {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CertRole::Authority => "authority",
            CertRole::Holder => "holder",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Validity {
    pub not_before: DateTime<Utc>,
    pub not_after: DateTime<Utc>,
}

impl Validity {
    pub fn new(not_before: DateTime<Utc>, not_after: DateTime<Utc>) -> Self {
        Validity { not_before: not_before.trunc_subsecs(0), not_after: not_after.trunc_subsecs(0) }
    }

    pub fn days_from(start: DateTime<Utc>, days: i64) -> Self {
        Validity::new(start, start + chrono::Duration::days(days))
    }
}

/// Publisher certificate. The JSON form is the certificate envelope.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Certificate {
    pub version: u32,
    pub serial: Serial,
    #[serde(rename = "subject")]
    pub subject_name: String,
    pub role: CertRole,
    pub pubkey_alg: String,
    #[serde(rename = "pubkey", with = "b64")]
    pub subject_public_key: Vec<u8>,
    #[serde(rename = "prefixes")]
    pub authorized_prefixes: PrefixSet,
    pub not_before: DateTime<Utc>,
    pub not_after: DateTime<Utc>,
    /// Absent for self-signed roots.
    pub issuer_serial: Option<Serial>,
    #[serde(rename = "issuer_sig", with = "b64")]
    pub issuer_signature: Vec<u8>,
}

impl Certificate {
    pub fn is_root(&self) -> bool {
        self.issuer_serial.is_none()
    }

    pub fn verification_key(&self) -> VerificationKey {
        VerificationKey { alg: self.pubkey_alg.clone(), bytes: self.subject_public_key.clone() }
    }

    pub fn valid_at(&self, at: DateTime<Utc>) -> bool {
        self.not_before <= at && at < self.not_after
    }

    /// The bytes covered by `issuer_signature`.
    pub fn body_bytes(&self) -> Vec<u8> {
        body_bytes(Some(self.serial), self)
    }

    pub fn verify_issued_by(&self, issuer_key: &VerificationKey) -> bool {
        issuer_key.verify(&self.body_bytes(), &self.issuer_signature)
    }
}

fn body_bytes(serial: Option<Serial>, c: &Certificate) -> Vec<u8> {
    let mut out = String::from("geofeed-cert/1\n");
    let serial = serial.map_or_else(|| "-".to_string(), |s| s.to_string());
    let issuer = c.issuer_serial.map_or_else(|| "-".to_string(), |s| s.to_string());
    out.push_str(&format!("version={}\nserial={serial}\n", c.version));
    out.push_str(&format!("subject={}:{}\n", c.subject_name.len(), c.subject_name));
    out.push_str(&format!("role={}\npubkey_alg={}:{}\n", c.role, c.pubkey_alg.len(), c.pubkey_alg));
    out.push_str(&format!("pubkey={}\n", crate::geofeed::hex_lower(&c.subject_public_key)));
    out.push_str(&format!("prefixes={}\n", c.authorized_prefixes.render()));
    out.push_str(&format!("not_before={}\nnot_after={}\n", c.not_before.timestamp(), c.not_after.timestamp()));
    out.push_str(&format!("issuer={issuer}\n"));
    out.into_bytes()
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum IssueError {
    #[error("delegated prefix {0} is not covered by the issuer's prefixes")]
    DelegationExceedsIssuer(Prefix),
    #[error("issuer certificate {0} is not valid at issuance time")]
    ExpiredIssuer(Serial),
    #[error("not_before must precede not_after")]
    InvalidValidity,
    #[error("holder certificates need at least one authorized prefix")]
    EmptyAuthorization,
    #[error("signing identity does not match the issuer certificate key")]
    KeyMismatch,
}

/// Fields the subject supplies when asking for a certificate.
#[derive(Debug, Clone)]
pub struct CertificateRequest {
    pub subject_name: String,
    pub subject_key: VerificationKey,
    pub role: CertRole,
    pub prefixes: PrefixSet,
    pub validity: Validity,
}

fn check_request(req: &CertificateRequest) -> Result<(), IssueError> {
    if req.validity.not_before >= req.validity.not_after {
        return Err(IssueError::InvalidValidity);
    }
    if req.role == CertRole::Holder && req.prefixes.is_empty() {
        return Err(IssueError::EmptyAuthorization);
    }
    Ok(())
}

fn build(req: CertificateRequest, issuer_serial: Option<Serial>, signer: &Identity) -> Certificate {
    let mut cert = Certificate {
        version: 1,
        serial: Serial(0),
        subject_name: req.subject_name,
        role: req.role,
        pubkey_alg: req.subject_key.alg,
        subject_public_key: req.subject_key.bytes,
        authorized_prefixes: req.prefixes,
        not_before: req.validity.not_before,
        not_after: req.validity.not_after,
        issuer_serial,
        issuer_signature: Vec::new(),
    };
    let digest = Sha256::digest(body_bytes(None, &cert));
    cert.serial = Serial(u64::from_be_bytes(digest[..8].try_into().expect("8 bytes")));
    cert.issuer_signature = signer.sign(&cert.body_bytes());
    cert
}

/// Self-signed trust anchor.
pub fn self_signed(identity: &Identity, role: CertRole, prefixes: PrefixSet, validity: Validity) -> Result<Certificate, IssueError> {
    let req = CertificateRequest {
        subject_name: identity.subject().to_string(),
        subject_key: identity.verification_key(),
        role,
        prefixes,
        validity,
    };
    check_request(&req)?;
    Ok(build(req, None, identity))
}

/// Issues a certificate under `issuer_cert`.
///
/// Roots may delegate any prefixes. Every other issuer, authority or holder,
/// can only delegate prefixes it holds itself.
pub fn issue_certificate(
    issuer: &Identity,
    issuer_cert: &Certificate,
    req: CertificateRequest,
    at: DateTime<Utc>,
) -> Result<Certificate, IssueError> {
    if issuer.verification_key() != issuer_cert.verification_key() {
        return Err(IssueError::KeyMismatch);
    }
    if !issuer_cert.valid_at(at) {
        return Err(IssueError::ExpiredIssuer(issuer_cert.serial));
    }
    check_request(&req)?;
    if !issuer_cert.is_root() {
        if let Some(p) = req.prefixes.iter().find(|p| !issuer_cert.authorized_prefixes.contains(p)) {
            return Err(IssueError::DelegationExceedsIssuer(*p));
        }
    }
    Ok(build(req, Some(issuer_cert.serial), issuer))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::auth::identity::generate_identity;

    fn set(items: &[&str]) -> PrefixSet {
        items.iter().map(|s| s.parse::<Prefix>().unwrap()).collect()
    }

    fn t0() -> DateTime<Utc> {
        "2024-03-01T00:00:00Z".parse().unwrap()
    }

    fn req(id: &Identity, role: CertRole, prefixes: &[&str]) -> CertificateRequest {
        CertificateRequest {
            subject_name: id.subject().into(),
            subject_key: id.verification_key(),
            role,
            prefixes: set(prefixes),
            validity: Validity::days_from(t0(), 365),
        }
    }

    struct Chain {
        arin: Identity,
        arin_cert: Certificate,
        att: Identity,
        att_cert: Certificate,
    }

    fn chain() -> Chain {
        let ca = generate_identity("Verisign", Some(b"t"));
        let ca_cert = self_signed(&ca, CertRole::Authority, PrefixSet::new(), Validity::days_from(t0(), 3650)).unwrap();
        let arin = generate_identity("ARIN", Some(b"t"));
        let arin_cert = issue_certificate(&ca, &ca_cert, req(&arin, CertRole::Holder, &["120.0.0.0/8"]), t0()).unwrap();
        let att = generate_identity("AT&T", Some(b"t"));
        let att_cert = issue_certificate(&arin, &arin_cert, req(&att, CertRole::Holder, &["120.0.0.0/8"]), t0()).unwrap();
        Chain { arin, arin_cert, att, att_cert }
    }

    #[test]
    fn delegation_examples() {
        let c = chain();
        assert!(c.att_cert.verify_issued_by(&c.arin_cert.verification_key()));
        let ls = generate_identity("LS Networks", Some(b"t"));
        let ls_cert = issue_certificate(&c.att, &c.att_cert, req(&ls, CertRole::Holder, &["120.1.1.0/24"]), t0()).unwrap();
        assert!(ls_cert.verify_issued_by(&c.att_cert.verification_key()));
        assert_eq!(ls_cert.issuer_serial, Some(c.att_cert.serial));

        let err = issue_certificate(&c.att, &c.att_cert, req(&ls, CertRole::Holder, &["121.0.0.0/24"]), t0()).unwrap_err();
        assert_eq!(err, IssueError::DelegationExceedsIssuer("121.0.0.0/24".parse().unwrap()));
    }

    #[test]
    fn expired_issuer() {
        let c = chain();
        let later = t0() + chrono::Duration::days(400);
        let ls = generate_identity("LS", None);
        let err = issue_certificate(&c.att, &c.att_cert, req(&ls, CertRole::Holder, &["120.1.1.0/24"]), later).unwrap_err();
        assert_eq!(err, IssueError::ExpiredIssuer(c.att_cert.serial));
    }

    #[test]
    fn wrong_identity_or_request() {
        let c = chain();
        let ls = generate_identity("LS", None);
        assert_eq!(
            issue_certificate(&c.arin, &c.att_cert, req(&ls, CertRole::Holder, &["120.1.1.0/24"]), t0()).unwrap_err(),
            IssueError::KeyMismatch
        );
        assert_eq!(
            issue_certificate(&c.att, &c.att_cert, req(&ls, CertRole::Holder, &[]), t0()).unwrap_err(),
            IssueError::EmptyAuthorization
        );
        let mut bad = req(&ls, CertRole::Holder, &["120.1.1.0/24"]);
        bad.validity = Validity::new(t0(), t0());
        assert_eq!(issue_certificate(&c.att, &c.att_cert, bad, t0()).unwrap_err(), IssueError::InvalidValidity);
    }

    #[test]
    fn non_root_authority_is_constrained() {
        let c = chain();
        let ra = generate_identity("RA", None);
        let ra_cert = issue_certificate(&c.arin, &c.arin_cert, req(&ra, CertRole::Authority, &[]), t0()).unwrap();
        let x = generate_identity("X", None);
        assert!(matches!(
            issue_certificate(&ra, &ra_cert, req(&x, CertRole::Holder, &["120.1.0.0/16"]), t0()),
            Err(IssueError::DelegationExceedsIssuer(_))
        ));
    }

    #[test]
    fn tampering_breaks_issuer_signature() {
        let c = chain();
        let mut cert = c.att_cert.clone();
        cert.authorized_prefixes = set(&["0.0.0.0/0"]);
        assert!(!cert.verify_issued_by(&c.arin_cert.verification_key()));
    }

    #[test]
    fn envelope_json() {
        let c = chain();
        let json = serde_json::to_value(&c.att_cert).unwrap();
        for key in
            ["version", "serial", "subject", "pubkey_alg", "pubkey", "prefixes", "not_before", "not_after", "issuer_serial", "issuer_sig"]
        {
            assert!(json.get(key).is_some(), "{key}");
        }
        assert_eq!(json["prefixes"], serde_json::json!(["120.0.0.0/8"]));
        let back: Certificate = serde_json::from_value(json).unwrap();
        assert_eq!(back, c.att_cert);
        assert!(back.verify_issued_by(&c.arin_cert.verification_key()));
    }
}
