//! Synthetic delegation hierarchy for timing issuance, signing and
//! verification at scale.
//!
//! Level `d` of a depth-`D` hierarchy over `N` leaves has `ceil(N^(d/D))`
//! holders, so the bottom level is exactly the `N` leaf publishers. Leaf `j`
//! holds `10.(j/256).(j%256).0/24`; every intermediate holds the union of
//! its descendants. A root authority sits above level 1. All leaves share a
//! single `N`-line geofeed file: each leaf signs its own line and its parent
//! countersigns that signature.

use std::time::{Duration, Instant};

use chrono::{DateTime, SubsecRound, Utc};
use serde::Serialize;
use sha2::{Digest, Sha256};

use super::bundle::{countersign_decoded, sign_decoded, SignError, SignedGeofeedBundle};
use super::cert::{issue_certificate, self_signed, CertRole, Certificate, CertificateRequest, IssueError, Validity};
use super::identity::{generate_identity, Identity};
use super::verify::{verify_bundle, CertificateStore, VerifyError};
use crate::geofeed::decode_file;
use crate::prefix::{Prefix, PrefixSet};

pub const MAX_LEAVES: usize = 65536;

#[derive(Debug, thiserror::Error)]
pub enum BenchError {
    #[error("certificate count must be at least 1")]
    NoCertificates,
    #[error("at most {MAX_LEAVES} leaf certificates are supported, got {0}")]
    TooManyCertificates(usize),
    #[error("depth must be at least 1")]
    ZeroDepth,
    #[error(transparent)]
    Issue(#[from] IssueError),
    #[error(transparent)]
    Sign(#[from] SignError),
    #[error(transparent)]
    Verify(#[from] VerifyError),
}

#[derive(Debug, Clone, Serialize)]
pub struct BenchReport {
    pub leaves: usize,
    pub depth: usize,
    /// Holders per level, level 1 first. Excludes the root.
    pub level_sizes: Vec<usize>,
    pub certificates: usize,
    pub chain_elements: usize,
    pub valid_elements: usize,
    #[serde(serialize_with = "ms")]
    pub issuance: Duration,
    #[serde(serialize_with = "ms")]
    pub signing: Duration,
    #[serde(serialize_with = "ms")]
    pub verification: Duration,
    #[serde(serialize_with = "ms")]
    pub total: Duration,
}

fn ms<S: serde::Serializer>(d: &Duration, s: S) -> Result<S::Ok, S::Error> {
    s.serialize_f64(d.as_secs_f64() * 1000.0)
}

impl BenchReport {
    pub fn all_valid(&self) -> bool {
        self.valid_elements == self.chain_elements
    }
}

/// `ceil(n^(d/depth))` for `d` in 1..=depth, with the last level pinned to `n`.
pub fn level_sizes(n: usize, depth: usize) -> Vec<usize> {
    let mut sizes: Vec<usize> = (1..=depth)
        .map(|d| {
            let x = (n as f64).powf(d as f64 / depth as f64);
            // Guard against powf landing just above an exact integer.
            let r = x.round();
            let c = if (x - r).abs() < 1e-9 { r } else { x.ceil() };
            (c as usize).clamp(1, n)
        })
        .collect();
    if let Some(last) = sizes.last_mut() {
        *last = n;
    }
    sizes
}

pub fn leaf_prefix(j: usize) -> Prefix {
    let addr = std::net::Ipv4Addr::new(10, (j / 256) as u8, (j % 256) as u8, 0);
    Prefix::new(addr.into(), 24).expect("aligned /24")
}

/// Parent index at the level above for node `k` of a level with `n` nodes.
fn parent_of(k: usize, n: usize, n_up: usize) -> usize {
    k * n_up / n
}

/// The shared geofeed file: one line per leaf.
pub fn shared_file(n: usize) -> Vec<u8> {
    let mut out = String::with_capacity(n * 40);
    out.push_str("# synthetic shared geofeed\r\n");
    for j in 0..n {
        out.push_str(&format!("{},US,US-CA,Los Angeles,{:05}\r\n", leaf_prefix(j), j % 100000));
    }
    out.into_bytes()
}

pub fn run_bench(leaves: usize, depth: usize) -> Result<BenchReport, BenchError> {
    run_bench_at(leaves, depth, Utc::now())
}

pub fn run_bench_at(leaves: usize, depth: usize, now: DateTime<Utc>) -> Result<BenchReport, BenchError> {
    if leaves == 0 {
        return Err(BenchError::NoCertificates);
    }
    if leaves > MAX_LEAVES {
        return Err(BenchError::TooManyCertificates(leaves));
    }
    if depth == 0 {
        return Err(BenchError::ZeroDepth);
    }
    let start = Instant::now();
    let now = now.trunc_subsecs(0);
    let validity = Validity::days_from(now - chrono::Duration::days(1), 366);
    let sizes = level_sizes(leaves, depth);

    // Prefixes per node, computed bottom-up.
    let mut prefixes: Vec<Vec<Vec<Prefix>>> = sizes.iter().map(|&n| vec![Vec::new(); n]).collect();
    for (j, leaf) in prefixes[depth - 1].iter_mut().enumerate() {
        leaf.push(leaf_prefix(j));
    }
    for d in (1..depth).rev() {
        let (upper, lower) = prefixes.split_at_mut(d);
        for (k, p) in lower[0].iter().enumerate() {
            upper[d - 1][parent_of(k, sizes[d], sizes[d - 1])].extend_from_slice(p);
        }
    }

    let seed = b"geofeed-bench";
    let root_id = generate_identity("Bench Root CA", Some(seed));
    let root = self_signed(&root_id, CertRole::Authority, PrefixSet::new(), validity)?;
    let mut store = CertificateStore::new();
    let mut levels: Vec<Vec<(Identity, Certificate)>> = Vec::with_capacity(depth);
    for d in 0..depth {
        let mut level = Vec::with_capacity(sizes[d]);
        for k in 0..sizes[d] {
            let id = generate_identity(&format!("L{}-{}", d + 1, k), Some(seed));
            let (issuer_id, issuer_cert) = if d == 0 {
                (&root_id, &root)
            } else {
                let (i, c) = &levels[d - 1][parent_of(k, sizes[d], sizes[d - 1])];
                (i, c)
            };
            let req = CertificateRequest {
                subject_name: id.subject().to_string(),
                subject_key: id.verification_key(),
                role: CertRole::Holder,
                prefixes: prefixes[d][k].iter().copied().collect(),
                validity,
            };
            let cert = issue_certificate(issuer_id, issuer_cert, req, now)?;
            store.insert(cert.clone());
            level.push((id, cert));
        }
        levels.push(level);
    }
    let issuance = start.elapsed();

    let t = Instant::now();
    let file = shared_file(leaves);
    let decoded = decode_file(&file, "");
    let file_digest = Sha256::digest(&file);
    let mut bundle = SignedGeofeedBundle::new(&file, None, false);
    let leaf_level = &levels[depth - 1];
    for (j, (id, cert)) in leaf_level.iter().enumerate() {
        let scope: PrefixSet = std::iter::once(leaf_prefix(j)).collect();
        let idx = bundle.push(sign_decoded(id, cert, &decoded, &file_digest, scope, now)?)?;
        if depth > 1 {
            let (pid, pcert) = &levels[depth - 2][parent_of(j, sizes[depth - 1], sizes[depth - 2])];
            countersign_decoded(pid, pcert, &mut bundle, &decoded, idx, now)?;
        }
    }
    let signing = t.elapsed();

    let t = Instant::now();
    let report = verify_bundle(&bundle, &file, std::slice::from_ref(&root), &store, now)?;
    let verification = t.elapsed();

    Ok(BenchReport {
        leaves,
        depth,
        certificates: 1 + sizes.iter().sum::<usize>(),
        level_sizes: sizes,
        chain_elements: report.elements.len(),
        valid_elements: report.elements.iter().filter(|e| e.valid).count(),
        issuance,
        signing,
        verification,
        total: start.elapsed(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn level_shapes() {
        assert_eq!(level_sizes(1800, 3), vec![13, 148, 1800]);
        assert_eq!(level_sizes(1, 3), vec![1, 1, 1]);
        assert_eq!(level_sizes(1000, 3), vec![10, 100, 1000]);
        assert_eq!(level_sizes(5, 1), vec![5]);
    }

    #[test]
    fn rejects_bad_sizes() {
        assert!(matches!(run_bench(0, 3), Err(BenchError::NoCertificates)));
        assert!(matches!(run_bench(MAX_LEAVES + 1, 3), Err(BenchError::TooManyCertificates(_))));
        assert!(matches!(run_bench(1, 0), Err(BenchError::ZeroDepth)));
    }

    #[test]
    fn single_chain() {
        let r = run_bench(1, 3).unwrap();
        assert_eq!(r.certificates, 4);
        assert_eq!(r.chain_elements, 2);
        assert!(r.all_valid());
    }

    #[test]
    fn small_hierarchy_verifies() {
        let r = run_bench(50, 3).unwrap();
        assert_eq!(r.chain_elements, 100);
        assert!(r.all_valid());
        let r = run_bench(7, 1).unwrap();
        assert_eq!(r.chain_elements, 7);
        assert!(r.all_valid());
    }
}
