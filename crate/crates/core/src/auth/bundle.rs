//! Signed geofeed bundles: a file reference plus an append-only chain of
//! scoped signatures and countersignatures.

use chrono::{DateTime, SubsecRound, Utc};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::b64;
use super::cert::{CertRole, Certificate, Serial};
use super::identity::Identity;
use super::scope::{scope_digest, ScopeError};
use super::SHA256;
use crate::geofeed::{decode_file, GeofeedFile};
use crate::prefix::PrefixSet;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Target {
    FileScope,
    PriorSignature(usize),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChainElement {
    pub signer_serial: Serial,
    pub scope_prefixes: PrefixSet,
    #[serde(with = "b64")]
    pub scope_digest: Vec<u8>,
    pub target: Target,
    pub sig_alg: String,
    #[serde(rename = "sig", with = "b64")]
    pub signature: Vec<u8>,
    pub signing_time: DateTime<Utc>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileRef {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub url: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none", with = "b64::option")]
    pub embedded: Option<Vec<u8>>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SignedGeofeedBundle {
    pub version: u32,
    pub file: FileRef,
    pub file_digest_alg: String,
    #[serde(with = "b64")]
    pub file_digest: Vec<u8>,
    pub chain: Vec<ChainElement>,
}

impl SignedGeofeedBundle {
    /// Empty bundle over `file`. The bytes are embedded when `embed` is set.
    pub fn new(file: &[u8], url: Option<String>, embed: bool) -> Self {
        SignedGeofeedBundle {
            version: 1,
            file: FileRef { url, embedded: embed.then(|| file.to_vec()) },
            file_digest_alg: SHA256.to_string(),
            file_digest: Sha256::digest(file).to_vec(),
            chain: Vec::new(),
        }
    }

    pub fn matches_file(&self, file: &[u8]) -> bool {
        self.file_digest_alg == SHA256 && self.file_digest == Sha256::digest(file).as_slice()
    }

    /// Appends a file-scope element produced by [`sign_scope`].
    pub fn push(&mut self, element: ChainElement) -> Result<usize, SignError> {
        if let Target::PriorSignature(j) = element.target {
            if j >= self.chain.len() {
                return Err(SignError::TargetOutOfRange { index: j, len: self.chain.len() });
            }
        }
        self.chain.push(element);
        Ok(self.chain.len() - 1)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum SignError {
    #[error("scope is not covered by the signer's authorized prefixes")]
    ScopeExceedsAuthorization,
    #[error("certificate {0} is not valid at signing time")]
    ExpiredCertificate(Serial),
    #[error("target element {index} does not exist (chain has {len})")]
    TargetOutOfRange { index: usize, len: usize },
    #[error("target element's scope digest does not match the file")]
    TargetDigestMismatch,
    #[error("file does not match the bundle's file digest")]
    FileDigestMismatch,
    #[error("signing identity does not match the certificate key")]
    KeyMismatch,
    #[error(transparent)]
    Scope(#[from] ScopeError),
}

/// Bytes covered by an element signature.
pub(crate) fn signing_message(
    target: Target,
    target_signature: &[u8],
    scope_digest: &[u8],
    file_digest: &[u8],
    signer: Serial,
    signing_time: DateTime<Utc>,
) -> Vec<u8> {
    let mut msg = b"geofeed-sig/1\0".to_vec();
    match target {
        Target::FileScope => msg.push(0),
        Target::PriorSignature(j) => {
            msg.push(1);
            msg.extend_from_slice(&(j as u64).to_be_bytes());
            msg.extend_from_slice(&(target_signature.len() as u32).to_be_bytes());
            msg.extend_from_slice(target_signature);
        }
    }
    msg.extend_from_slice(scope_digest);
    msg.extend_from_slice(file_digest);
    msg.extend_from_slice(&signer.0.to_be_bytes());
    msg.extend_from_slice(&signing_time.timestamp().to_be_bytes());
    msg
}

fn check_signer(identity: &Identity, cert: &Certificate, at: DateTime<Utc>) -> Result<(), SignError> {
    if identity.verification_key() != cert.verification_key() {
        return Err(SignError::KeyMismatch);
    }
    if !cert.valid_at(at) {
        return Err(SignError::ExpiredCertificate(cert.serial));
    }
    Ok(())
}

/// Signs the lines of `file` covered by `scope` as a file-scope element.
pub fn sign_scope(
    identity: &Identity,
    cert: &Certificate,
    file: &[u8],
    scope: PrefixSet,
    signing_time: DateTime<Utc>,
) -> Result<ChainElement, SignError> {
    sign_decoded(identity, cert, &decode_file(file, ""), &Sha256::digest(file), scope, signing_time)
}

pub(crate) fn sign_decoded(
    identity: &Identity,
    cert: &Certificate,
    decoded: &GeofeedFile,
    file_digest: &[u8],
    scope: PrefixSet,
    signing_time: DateTime<Utc>,
) -> Result<ChainElement, SignError> {
    let signing_time = signing_time.trunc_subsecs(0);
    check_signer(identity, cert, signing_time)?;
    if !scope.is_subset(&cert.authorized_prefixes) {
        return Err(SignError::ScopeExceedsAuthorization);
    }
    let digest = scope_digest(decoded, &scope)?;
    let msg = signing_message(Target::FileScope, &[], &digest, file_digest, cert.serial, signing_time);
    Ok(ChainElement {
        signer_serial: cert.serial,
        scope_prefixes: scope,
        scope_digest: digest.to_vec(),
        target: Target::FileScope,
        sig_alg: cert.pubkey_alg.clone(),
        signature: identity.sign(&msg),
        signing_time,
    })
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum CountersignTarget {
    /// Sign the countersigner's own scope of the file.
    FileScope(PrefixSet),
    /// Sign an existing element's signature.
    PriorSignature(usize),
}

/// Appends a countersignature to `bundle` and returns its index.
///
/// For a prior-signature target the new element inherits the target's scope,
/// and holders must themselves be authorized for that scope. Authorities may
/// attest without holding the prefixes.
pub fn countersign(
    identity: &Identity,
    cert: &Certificate,
    bundle: &mut SignedGeofeedBundle,
    file: &[u8],
    target: CountersignTarget,
    signing_time: DateTime<Utc>,
) -> Result<usize, SignError> {
    if !bundle.matches_file(file) {
        return Err(SignError::FileDigestMismatch);
    }
    let decoded = decode_file(file, "");
    match target {
        CountersignTarget::FileScope(scope) => {
            let element = sign_decoded(identity, cert, &decoded, &bundle.file_digest, scope, signing_time)?;
            bundle.push(element)
        }
        CountersignTarget::PriorSignature(j) => countersign_decoded(identity, cert, bundle, &decoded, j, signing_time),
    }
}

/// Prior-signature countersignature over an already decoded file that the
/// caller has checked against the bundle digest.
pub(crate) fn countersign_decoded(
    identity: &Identity,
    cert: &Certificate,
    bundle: &mut SignedGeofeedBundle,
    decoded: &GeofeedFile,
    j: usize,
    signing_time: DateTime<Utc>,
) -> Result<usize, SignError> {
    let signing_time = signing_time.trunc_subsecs(0);
    let prior = bundle.chain.get(j).ok_or(SignError::TargetOutOfRange { index: j, len: bundle.chain.len() })?;
    check_signer(identity, cert, signing_time)?;
    if cert.role == CertRole::Holder && !prior.scope_prefixes.is_subset(&cert.authorized_prefixes) {
        return Err(SignError::ScopeExceedsAuthorization);
    }
    let digest = scope_digest(decoded, &prior.scope_prefixes)?;
    if digest.as_slice() != prior.scope_digest {
        return Err(SignError::TargetDigestMismatch);
    }
    let target = Target::PriorSignature(j);
    let msg = signing_message(target, &prior.signature, &digest, &bundle.file_digest, cert.serial, signing_time);
    let element = ChainElement {
        signer_serial: cert.serial,
        scope_prefixes: prior.scope_prefixes.clone(),
        scope_digest: digest.to_vec(),
        target,
        sig_alg: cert.pubkey_alg.clone(),
        signature: identity.sign(&msg),
        signing_time,
    };
    bundle.push(element)
}
