//! Canonical bytes for a signature scope.
//!
//! The canonical form is itself a geofeed file: a `# scope:` comment naming
//! the scope prefixes, then the selected data lines in file order, each
//! terminated by LF. Feeding it back through [`canonicalize_scope`] with the
//! same scope returns it unchanged.

use sha2::{Digest, Sha256};

use crate::geofeed::{decode_file, GeofeedFile};
use crate::prefix::PrefixSet;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ScopeError {
    #[error("scope selects malformed lines {0:?}")]
    ScopeContainsMalformedLine(Vec<usize>),
    #[error("scope selects no lines")]
    EmptyScope,
}

pub fn canonicalize_scope(file: &[u8], scope: &PrefixSet) -> Result<Vec<u8>, ScopeError> {
    canonicalize_decoded(&decode_file(file, ""), scope)
}

/// Same as [`canonicalize_scope`] over an already decoded file.
pub fn canonicalize_decoded(file: &GeofeedFile, scope: &PrefixSet) -> Result<Vec<u8>, ScopeError> {
    let selected: Vec<_> = file.lines.iter().filter(|l| l.ip_prefix.is_some_and(|p| scope.contains(&p))).collect();
    if selected.is_empty() {
        return Err(ScopeError::EmptyScope);
    }
    let malformed: Vec<usize> = selected.iter().filter(|l| !l.verdict.is_valid()).map(|l| l.line_number).collect();
    if !malformed.is_empty() {
        return Err(ScopeError::ScopeContainsMalformedLine(malformed));
    }
    let mut out = format!("# scope: {}\n", scope.render()).into_bytes();
    for line in selected {
        out.extend_from_slice(line.raw.as_bytes());
        out.push(b'\n');
    }
    Ok(out)
}

/// What one signature covers.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SignatureScope {
    pub scope_prefixes: PrefixSet,
    pub file_digest: [u8; 32],
    pub scope_digest: [u8; 32],
}

impl SignatureScope {
    pub fn compute(file: &[u8], scope_prefixes: PrefixSet) -> Result<Self, ScopeError> {
        let scope_digest = Sha256::digest(canonicalize_scope(file, &scope_prefixes)?).into();
        Ok(SignatureScope { scope_prefixes, file_digest: Sha256::digest(file).into(), scope_digest })
    }
}

pub(crate) fn scope_digest(file: &GeofeedFile, scope: &PrefixSet) -> Result<[u8; 32], ScopeError> {
    Ok(Sha256::digest(canonicalize_decoded(file, scope)?).into())
}
