//! The delegation example used by the `demo` command and the test suites:
//! a root CA attests ARIN, ARIN delegates 120.0.0.0/8 to AT&T, and AT&T
//! leases 120.1.1.0/24 to LS Networks. LS Networks and AT&T publish into one
//! shared geofeed file.

use chrono::{DateTime, Utc};

use super::bundle::{countersign, sign_scope, CountersignTarget, SignError, SignedGeofeedBundle};
use super::cert::{issue_certificate, self_signed, CertRole, Certificate, CertificateRequest, IssueError, Validity};
use super::identity::{generate_identity, Identity};
use super::verify::CertificateStore;
use crate::prefix::{Prefix, PrefixSet};

pub const DEMO_FILE: &str = "# shared geofeed\r\n\
120.1.1.0/25,US,US-CA,Los Angeles,90007\r\n\
120.1.1.128/25,US,US-CA,Los Angeles,90012\r\n\
120.2.0.0/16,US,US-TX,Dallas,75201\r\n\
198.51.100.0/24,US,,,\r\n";

#[derive(Debug, Clone)]
pub struct Party {
    pub identity: Identity,
    pub cert: Certificate,
}

#[derive(Debug, Clone)]
pub struct Demo {
    pub ca: Party,
    pub arin: Party,
    pub att: Party,
    pub ls: Party,
    pub file: Vec<u8>,
    /// Elements: 0 LS Networks over 120.1.1.0/24, 1 AT&T over 0, 2 CA over 1,
    /// 3 AT&T over 120.2.0.0/16, 4 ARIN over 3.
    pub bundle: SignedGeofeedBundle,
    pub issued_at: DateTime<Utc>,
}

#[derive(Debug, thiserror::Error)]
pub enum DemoError {
    #[error(transparent)]
    Issue(#[from] IssueError),
    #[error(transparent)]
    Sign(#[from] SignError),
}

fn set(items: &[&str]) -> PrefixSet {
    items.iter().map(|s| s.parse::<Prefix>().expect("demo prefix")).collect()
}

fn issue(
    issuer: &Party,
    subject: &str,
    seed: &[u8],
    role: CertRole,
    prefixes: PrefixSet,
    validity: Validity,
    at: DateTime<Utc>,
) -> Result<Party, IssueError> {
    let identity = generate_identity(subject, Some(seed));
    let req = CertificateRequest { subject_name: subject.to_string(), subject_key: identity.verification_key(), role, prefixes, validity };
    let cert = issue_certificate(&issuer.identity, &issuer.cert, req, at)?;
    Ok(Party { identity, cert })
}

impl Demo {
    /// Builds the hierarchy and bundle with keys derived from `seed` and
    /// certificates valid for a year starting at `at`.
    pub fn build(seed: &[u8], at: DateTime<Utc>) -> Result<Demo, DemoError> {
        Self::build_with_file(seed, at, DEMO_FILE.as_bytes())
    }

    pub fn build_with_file(seed: &[u8], at: DateTime<Utc>, file: &[u8]) -> Result<Demo, DemoError> {
        let validity = Validity::days_from(at, 365);
        let at = validity.not_before;
        let ca_id = generate_identity("Verisign", Some(seed));
        let ca = Party { cert: self_signed(&ca_id, CertRole::Authority, PrefixSet::new(), validity)?, identity: ca_id };
        let arin = issue(&ca, "ARIN", seed, CertRole::Holder, set(&["120.0.0.0/8"]), validity, at)?;
        let att = issue(&arin, "AT&T", seed, CertRole::Holder, set(&["120.0.0.0/8"]), validity, at)?;
        let ls = issue(&att, "LS Networks", seed, CertRole::Holder, set(&["120.1.1.0/24"]), validity, at)?;

        let mut bundle = SignedGeofeedBundle::new(file, None, true);
        bundle.push(sign_scope(&ls.identity, &ls.cert, file, set(&["120.1.1.0/24"]), at)?)?;
        countersign(&att.identity, &att.cert, &mut bundle, file, CountersignTarget::PriorSignature(0), at)?;
        countersign(&ca.identity, &ca.cert, &mut bundle, file, CountersignTarget::PriorSignature(1), at)?;
        countersign(&att.identity, &att.cert, &mut bundle, file, CountersignTarget::FileScope(set(&["120.2.0.0/16"])), at)?;
        countersign(&arin.identity, &arin.cert, &mut bundle, file, CountersignTarget::PriorSignature(3), at)?;

        Ok(Demo { ca, arin, att, ls, file: file.to_vec(), bundle, issued_at: at })
    }

    pub fn anchors(&self) -> Vec<Certificate> {
        vec![self.ca.cert.clone()]
    }

    /// Every non-root certificate.
    pub fn store(&self) -> CertificateStore {
        [&self.arin, &self.att, &self.ls].into_iter().map(|p| p.cert.clone()).collect()
    }

    pub fn parties(&self) -> [&Party; 4] {
        [&self.ca, &self.arin, &self.att, &self.ls]
    }
}
