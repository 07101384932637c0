//! Per-element verification of signed geofeed bundles.
//!
//! Each element is checked for publisher authentication (the signer's
//! certificate path reaches a trust anchor and every certificate on it is
//! valid at the verification time), signature validity, scope digest
//! integrity against the supplied file, and scope authorization. Results are
//! reported per element; how much of the chain to require is the caller's
//! decision.

use std::collections::HashMap;

use chrono::{DateTime, Utc};
use serde::Serialize;

use super::bundle::{signing_message, SignedGeofeedBundle, Target};
use super::cert::{CertRole, Certificate, Serial};
use super::scope::scope_digest;
use crate::geofeed::decode_file;

const MAX_PATH_LEN: usize = 32;

/// Certificates available for path building, keyed by serial.
#[derive(Debug, Clone, Default)]
pub struct CertificateStore {
    certs: HashMap<Serial, Certificate>,
}

impl CertificateStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, cert: Certificate) {
        self.certs.insert(cert.serial, cert);
    }

    pub fn remove(&mut self, serial: Serial) -> Option<Certificate> {
        self.certs.remove(&serial)
    }

    pub fn get(&self, serial: Serial) -> Option<&Certificate> {
        self.certs.get(&serial)
    }

    pub fn len(&self) -> usize {
        self.certs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.certs.is_empty()
    }
}

impl FromIterator<Certificate> for CertificateStore {
    fn from_iter<I: IntoIterator<Item = Certificate>>(iter: I) -> Self {
        let mut store = CertificateStore::new();
        for c in iter {
            store.insert(c);
        }
        store
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ElementFailure {
    UnknownCertificate { serial: Serial },
    MissingIssuer { serial: Serial, issuer: Serial },
    NotValidAt { serial: Serial },
    BadCertificateSignature { serial: Serial },
    DelegationViolation { serial: Serial },
    UntrustedRoot { serial: Serial },
    PathTooLong,
    BadSignature,
    ScopeDigestMismatch,
    ScopeNotRecomputable { reason: String },
    ScopeExceedsAuthorization,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ElementResult {
    pub index: usize,
    pub signer_serial: Serial,
    pub signer_subject: Option<String>,
    pub target: Target,
    /// Subjects from the signer up to the trust anchor, as far as the path
    /// could be built.
    pub path: Vec<String>,
    pub publisher_authenticated: bool,
    pub signature_ok: bool,
    pub scope_digest_ok: bool,
    pub authorized: bool,
    pub failures: Vec<ElementFailure>,
    /// All four checks passed for this element.
    pub valid: bool,
    /// `valid`, and so is every element it countersigns, transitively.
    pub chain_valid: bool,
    /// Countersignature depth: 0 for file-scope elements.
    pub depth: usize,
    /// File-scope element this element ultimately attests.
    pub root: usize,
}

/// Deepest countersigner reached over one file-scope signature.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct TrustLevel {
    pub root: usize,
    /// Deepest element whose whole chain down to `root` verified.
    pub deepest_valid: Option<usize>,
    pub depth: Option<usize>,
    pub subject: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct VerificationReport {
    pub at: DateTime<Utc>,
    /// Whether the supplied file matches the bundle's whole-file digest.
    /// Scoped elements do not depend on it.
    pub file_digest_matches: bool,
    pub elements: Vec<ElementResult>,
    pub trust_levels: Vec<TrustLevel>,
}

impl VerificationReport {
    pub fn all_valid(&self) -> bool {
        self.elements.iter().all(|e| e.valid)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum VerifyError {
    #[error("malformed bundle: {0}")]
    Malformed(String),
}

struct PathResult {
    subjects: Vec<String>,
    failures: Vec<ElementFailure>,
}

struct PathBuilder<'a> {
    anchors: &'a [Certificate],
    store: &'a CertificateStore,
    at: DateTime<Utc>,
    cache: HashMap<Serial, (Vec<String>, Vec<ElementFailure>)>,
}

impl<'a> PathBuilder<'a> {
    fn lookup(&self, serial: Serial) -> Option<&'a Certificate> {
        self.store.get(serial).or_else(|| self.anchors.iter().find(|a| a.serial == serial))
    }

    fn build(&mut self, signer: &'a Certificate) -> PathResult {
        if let Some((subjects, failures)) = self.cache.get(&signer.serial) {
            return PathResult { subjects: subjects.clone(), failures: failures.clone() };
        }
        let mut subjects = Vec::new();
        let mut failures = Vec::new();
        let mut cert = signer;
        loop {
            subjects.push(cert.subject_name.clone());
            if subjects.len() > MAX_PATH_LEN {
                failures.push(ElementFailure::PathTooLong);
                break;
            }
            if !cert.valid_at(self.at) {
                failures.push(ElementFailure::NotValidAt { serial: cert.serial });
            }
            let Some(issuer_serial) = cert.issuer_serial else {
                if !self.anchors.iter().any(|a| a == cert) {
                    failures.push(ElementFailure::UntrustedRoot { serial: cert.serial });
                } else if !cert.verify_issued_by(&cert.verification_key()) {
                    failures.push(ElementFailure::BadCertificateSignature { serial: cert.serial });
                }
                break;
            };
            let Some(issuer) = self.lookup(issuer_serial) else {
                failures.push(ElementFailure::MissingIssuer { serial: cert.serial, issuer: issuer_serial });
                break;
            };
            if !cert.verify_issued_by(&issuer.verification_key()) {
                failures.push(ElementFailure::BadCertificateSignature { serial: cert.serial });
            }
            if !issuer.is_root() && !cert.authorized_prefixes.is_subset(&issuer.authorized_prefixes) {
                failures.push(ElementFailure::DelegationViolation { serial: cert.serial });
            }
            cert = issuer;
        }
        self.cache.insert(signer.serial, (subjects.clone(), failures.clone()));
        PathResult { subjects, failures }
    }
}

/// Verifies every element of `bundle` against `file` at time `at`.
pub fn verify_bundle(
    bundle: &SignedGeofeedBundle,
    file: &[u8],
    trust_anchors: &[Certificate],
    store: &CertificateStore,
    at: DateTime<Utc>,
) -> Result<VerificationReport, VerifyError> {
    for (i, el) in bundle.chain.iter().enumerate() {
        match el.target {
            Target::PriorSignature(_) if i == 0 => {
                return Err(VerifyError::Malformed("element 0 must target the file".into()));
            }
            Target::PriorSignature(j) if j >= i => {
                return Err(VerifyError::Malformed(format!("element {i} targets later element {j}")));
            }
            _ => {}
        }
    }

    let decoded = decode_file(file, "");
    let mut paths = PathBuilder { anchors: trust_anchors, store, at, cache: HashMap::new() };
    let mut elements: Vec<ElementResult> = Vec::with_capacity(bundle.chain.len());

    for (i, el) in bundle.chain.iter().enumerate() {
        let signer = paths.lookup(el.signer_serial);
        let mut failures = Vec::new();

        let (path, publisher_authenticated) = match signer {
            Some(cert) => {
                let r = paths.build(cert);
                let ok = r.failures.is_empty();
                failures.extend(r.failures);
                (r.subjects, ok)
            }
            None => {
                failures.push(ElementFailure::UnknownCertificate { serial: el.signer_serial });
                (Vec::new(), false)
            }
        };

        let target_sig: &[u8] = match el.target {
            Target::FileScope => &[],
            Target::PriorSignature(j) => &bundle.chain[j].signature,
        };
        let msg = signing_message(el.target, target_sig, &el.scope_digest, &bundle.file_digest, el.signer_serial, el.signing_time);
        let signature_ok = signer.is_some_and(|c| c.pubkey_alg == el.sig_alg && c.verification_key().verify(&msg, &el.signature));
        if signer.is_some() && !signature_ok {
            failures.push(ElementFailure::BadSignature);
        }

        let scope_digest_ok = match scope_digest(&decoded, &el.scope_prefixes) {
            Ok(d) if d.as_slice() == el.scope_digest => true,
            Ok(_) => {
                failures.push(ElementFailure::ScopeDigestMismatch);
                false
            }
            Err(e) => {
                failures.push(ElementFailure::ScopeNotRecomputable { reason: e.to_string() });
                false
            }
        };
        // Countersigning authorities attest without holding the prefixes.
        let attesting = signer.is_some_and(|c| c.role == CertRole::Authority) && matches!(el.target, Target::PriorSignature(_));
        let authorized = signer.is_some_and(|c| attesting || el.scope_prefixes.is_subset(&c.authorized_prefixes));
        if signer.is_some() && !authorized {
            failures.push(ElementFailure::ScopeExceedsAuthorization);
        }

        let valid = publisher_authenticated && signature_ok && scope_digest_ok && authorized;
        let (chain_valid, depth, root) = match el.target {
            Target::FileScope => (valid, 0, i),
            Target::PriorSignature(j) => {
                let t = &elements[j];
                (valid && t.chain_valid, t.depth + 1, t.root)
            }
        };
        elements.push(ElementResult {
            index: i,
            signer_serial: el.signer_serial,
            signer_subject: signer.map(|c| c.subject_name.clone()),
            target: el.target,
            path,
            publisher_authenticated,
            signature_ok,
            scope_digest_ok,
            authorized,
            failures,
            valid,
            chain_valid,
            depth,
            root,
        });
    }

    let trust_levels = elements
        .iter()
        .filter(|e| e.target == Target::FileScope)
        .map(|r| {
            let best = elements.iter().filter(|e| e.root == r.index && e.chain_valid).max_by_key(|e| (e.depth, std::cmp::Reverse(e.index)));
            TrustLevel {
                root: r.index,
                deepest_valid: best.map(|e| e.index),
                depth: best.map(|e| e.depth),
                subject: best.and_then(|e| e.signer_subject.clone()),
            }
        })
        .collect();

    Ok(VerificationReport { at, file_digest_matches: bundle.matches_file(file), elements, trust_levels })
}
