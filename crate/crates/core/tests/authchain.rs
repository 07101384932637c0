use chrono::{DateTime, Duration, Utc};
use geofeed_core::auth::demo::{Demo, DEMO_FILE};
use geofeed_core::auth::*;
use geofeed_core::prefix::{Prefix, PrefixSet};

fn t0() -> DateTime<Utc> {
    "2024-03-01T00:00:00Z".parse().unwrap()
}

fn set(items: &[&str]) -> PrefixSet {
    items.iter().map(|s| s.parse::<Prefix>().unwrap()).collect()
}

fn demo() -> Demo {
    Demo::build(b"test", t0()).unwrap()
}

fn verify(d: &Demo, file: &[u8], store: &CertificateStore, at: DateTime<Utc>) -> VerificationReport {
    verify_bundle(&d.bundle, file, &d.anchors(), store, at).unwrap()
}

fn valid_flags(r: &VerificationReport) -> Vec<bool> {
    r.elements.iter().map(|e| e.valid).collect()
}

#[test]
fn demo_chain_verifies() {
    let d = demo();
    let r = verify(&d, &d.file, &d.store(), t0() + Duration::days(10));
    assert!(r.all_valid(), "{:#?}", r.elements);
    assert!(r.file_digest_matches);
    assert_eq!(r.elements[0].path, ["LS Networks", "AT&T", "ARIN", "Verisign"]);
    assert_eq!(r.elements[2].depth, 2);
    assert_eq!(r.trust_levels.len(), 2);
    assert_eq!(r.trust_levels[0].subject.as_deref(), Some("Verisign"));
    assert_eq!(r.trust_levels[1].subject.as_deref(), Some("ARIN"));
}

#[test]
fn tampered_scope_fails_only_covering_elements() {
    let d = demo();
    let file = DEMO_FILE.replace("Dallas", "Dallaz");
    let r = verify(&d, file.as_bytes(), &d.store(), t0());
    assert_eq!(valid_flags(&r), [true, true, true, false, false]);
    assert!(!r.file_digest_matches);
    assert!(r.elements[3].failures.contains(&ElementFailure::ScopeDigestMismatch));
    assert_eq!(r.trust_levels[1].deepest_valid, None);

    let file = DEMO_FILE.replace("90012", "90013");
    let r = verify(&d, file.as_bytes(), &d.store(), t0());
    assert_eq!(valid_flags(&r), [false, false, false, true, true]);

    // Unsigned lines are outside every scope.
    let file = DEMO_FILE.replace("198.51.100.0/24,US", "198.51.100.0/24,DE");
    assert!(verify(&d, file.as_bytes(), &d.store(), t0()).all_valid());
}

#[test]
fn missing_intermediate_breaks_paths_through_it() {
    let d = demo();
    let mut store = d.store();
    store.remove(d.arin.cert.serial);
    let r = verify(&d, &d.file, &store, t0());
    assert_eq!(valid_flags(&r), [false, false, true, false, false]);
    assert!(r.elements[0].failures.contains(&ElementFailure::MissingIssuer { serial: d.att.cert.serial, issuer: d.arin.cert.serial }));
    assert!(r.elements[4].failures.contains(&ElementFailure::UnknownCertificate { serial: d.arin.cert.serial }));
    // The CA's countersignature verifies on its own but attests a broken chain.
    assert!(!r.elements[2].chain_valid);
}

#[test]
fn expiry_and_not_yet_valid() {
    let d = demo();
    let r = verify(&d, &d.file, &d.store(), t0() + Duration::days(400));
    assert!(r.elements.iter().all(|e| e.failures.iter().any(|f| matches!(f, ElementFailure::NotValidAt { .. }))));
    let r = verify(&d, &d.file, &d.store(), t0() - Duration::seconds(1));
    assert!(!r.elements.iter().any(|e| e.valid));
}

#[test]
fn expired_leaf_only_affects_its_elements() {
    let d = demo();
    let short = Validity::days_from(t0(), 5);
    let req = CertificateRequest {
        subject_name: "LS Networks".into(),
        subject_key: d.ls.identity.verification_key(),
        role: CertRole::Holder,
        prefixes: set(&["120.1.1.0/24"]),
        validity: short,
    };
    let ls_short = issue_certificate(&d.att.identity, &d.att.cert, req, t0()).unwrap();
    let mut bundle = SignedGeofeedBundle::new(&d.file, None, false);
    bundle.push(sign_scope(&d.ls.identity, &ls_short, &d.file, set(&["120.1.1.0/24"]), t0()).unwrap()).unwrap();
    countersign(&d.att.identity, &d.att.cert, &mut bundle, &d.file, CountersignTarget::PriorSignature(0), t0()).unwrap();
    let mut store = d.store();
    store.insert(ls_short.clone());

    let r = verify_bundle(&bundle, &d.file, &d.anchors(), &store, t0() + Duration::days(10)).unwrap();
    assert_eq!(r.elements[0].failures, [ElementFailure::NotValidAt { serial: ls_short.serial }]);
    assert!(r.elements[1].valid && !r.elements[1].chain_valid);

    assert_eq!(
        sign_scope(&d.ls.identity, &ls_short, &d.file, set(&["120.1.1.0/24"]), t0() + Duration::days(6)),
        Err(SignError::ExpiredCertificate(ls_short.serial))
    );
}

#[test]
fn signing_errors() {
    let d = demo();
    assert_eq!(sign_scope(&d.ls.identity, &d.ls.cert, &d.file, set(&["120.0.0.0/8"]), t0()), Err(SignError::ScopeExceedsAuthorization));
    assert_eq!(sign_scope(&d.att.identity, &d.ls.cert, &d.file, set(&["120.1.1.0/24"]), t0()), Err(SignError::KeyMismatch));
    let mut b = d.bundle.clone();
    assert_eq!(
        countersign(&d.att.identity, &d.att.cert, &mut b, &d.file, CountersignTarget::PriorSignature(7), t0()),
        Err(SignError::TargetOutOfRange { index: 7, len: 5 })
    );
    // LS Networks holds only the /24 and cannot vouch for AT&T's /16.
    assert_eq!(
        countersign(&d.ls.identity, &d.ls.cert, &mut b, &d.file, CountersignTarget::PriorSignature(3), t0()),
        Err(SignError::ScopeExceedsAuthorization)
    );
    assert_eq!(
        countersign(&d.att.identity, &d.att.cert, &mut b, b"other", CountersignTarget::PriorSignature(0), t0()),
        Err(SignError::FileDigestMismatch)
    );
}

#[test]
fn issuance_rules() {
    let d = demo();
    let other = generate_identity("Other", Some(b"x"));
    let req = |p: &[&str]| CertificateRequest {
        subject_name: "Other".into(),
        subject_key: other.verification_key(),
        role: CertRole::Holder,
        prefixes: set(p),
        validity: Validity::days_from(t0(), 30),
    };
    assert_eq!(
        issue_certificate(&d.att.identity, &d.att.cert, req(&["121.0.0.0/24"]), t0()),
        Err(IssueError::DelegationExceedsIssuer("121.0.0.0/24".parse().unwrap()))
    );
    assert!(issue_certificate(&d.ca.identity, &d.ca.cert, req(&["121.0.0.0/24"]), t0()).is_ok());
    assert!(matches!(
        issue_certificate(&d.att.identity, &d.att.cert, req(&["120.9.0.0/16"]), t0() + Duration::days(400)),
        Err(IssueError::ExpiredIssuer(_))
    ));
}

#[test]
fn forged_scope_claim_is_caught() {
    // A holder cannot escape its authorization by minting its own root.
    let d = demo();
    let mut b = SignedGeofeedBundle::new(&d.file, None, false);
    let err = sign_scope(&d.att.identity, &d.att.cert, &d.file, set(&["198.51.100.0/24"]), t0()).unwrap_err();
    assert_eq!(err, SignError::ScopeExceedsAuthorization);
    let rogue_cert = self_signed(&d.att.identity, CertRole::Holder, set(&["0.0.0.0/0"]), Validity::days_from(t0(), 30)).unwrap();
    let good = sign_scope(&d.att.identity, &rogue_cert, &d.file, set(&["198.51.100.0/24"]), t0()).unwrap();
    b.push(good).unwrap();
    let mut store = d.store();
    store.insert(rogue_cert.clone());
    let r = verify_bundle(&b, &d.file, &d.anchors(), &store, t0()).unwrap();
    assert!(r.elements[0].failures.contains(&ElementFailure::UntrustedRoot { serial: rogue_cert.serial }));
}

#[test]
fn appending_never_changes_earlier_results() {
    let d = demo();
    let mut b = SignedGeofeedBundle::new(&d.file, None, false);
    let mut previous: Vec<ElementResult> = Vec::new();
    type Step<'a> = Box<dyn Fn(&mut SignedGeofeedBundle) + 'a>;
    let steps: Vec<Step> = vec![
        Box::new(|b| {
            b.push(sign_scope(&d.ls.identity, &d.ls.cert, &d.file, set(&["120.1.1.0/24"]), t0()).unwrap()).unwrap();
        }),
        Box::new(|b| {
            countersign(&d.att.identity, &d.att.cert, b, &d.file, CountersignTarget::PriorSignature(0), t0()).unwrap();
        }),
        Box::new(|b| {
            countersign(&d.ca.identity, &d.ca.cert, b, &d.file, CountersignTarget::PriorSignature(1), t0()).unwrap();
        }),
        Box::new(|b| {
            countersign(&d.arin.identity, &d.arin.cert, b, &d.file, CountersignTarget::PriorSignature(0), t0()).unwrap();
        }),
    ];
    for step in steps {
        step(&mut b);
        let r = verify_bundle(&b, &d.file, &d.anchors(), &d.store(), t0()).unwrap();
        assert_eq!(&r.elements[..previous.len()], &previous[..]);
        previous = r.elements;
    }
    assert!(previous.iter().all(|e| e.chain_valid));
}

#[test]
fn malformed_bundles_are_rejected() {
    let d = demo();
    let mut b = d.bundle.clone();
    b.chain[0].target = Target::PriorSignature(0);
    assert!(verify_bundle(&b, &d.file, &d.anchors(), &d.store(), t0()).is_err());
    let mut b = d.bundle.clone();
    b.chain[2].target = Target::PriorSignature(3);
    assert!(verify_bundle(&b, &d.file, &d.anchors(), &d.store(), t0()).is_err());
}

#[test]
fn retargeted_countersignature_fails_signature() {
    let d = demo();
    let mut b = d.bundle.clone();
    b.chain[4].target = Target::PriorSignature(1);
    let r = verify_bundle(&b, &d.file, &d.anchors(), &d.store(), t0()).unwrap();
    assert!(r.elements[4].failures.contains(&ElementFailure::BadSignature));
}

#[test]
fn envelopes_round_trip_through_json() {
    let d = demo();
    let json = serde_json::to_string_pretty(&d.bundle).unwrap();
    for key in ["file_digest_alg", "signer_serial", "scope_prefixes", "scope_digest", "\"sig\"", "signing_time"] {
        assert!(json.contains(key), "{key}");
    }
    let back: SignedGeofeedBundle = serde_json::from_str(&json).unwrap();
    assert_eq!(back, d.bundle);
    assert_eq!(back.file.embedded.as_deref(), Some(d.file.as_slice()));

    let cert_json = serde_json::to_value(&d.ls.cert).unwrap();
    for key in
        ["version", "serial", "subject", "pubkey_alg", "pubkey", "prefixes", "not_before", "not_after", "issuer_serial", "issuer_sig"]
    {
        assert!(cert_json.get(key).is_some(), "{key}");
    }
    let back: Certificate = serde_json::from_value(cert_json).unwrap();
    assert_eq!(back, d.ls.cert);
}

#[test]
fn certificate_tampering_is_detected() {
    let d = demo();
    let mut store = d.store();
    let mut widened = d.ls.cert.clone();
    widened.authorized_prefixes = set(&["120.0.0.0/8"]);
    store.insert(widened);
    let r = verify(&d, &d.file, &store, t0());
    assert!(r.elements[0].failures.contains(&ElementFailure::BadCertificateSignature { serial: d.ls.cert.serial }));
}
