use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::time::Duration;

use geofeed_core::analytics::{as_category_breakdown, AsCategory, AsInfoProvider};
use geofeed_core::auth::{compare_ownership, MatchRule, OwnershipClaim};
use geofeed_core::geofeed::sha256_hex;
use geofeed_core::rpsl::Rir;
use geofeed_fetch::fixture::{FixtureServer, Route};
use geofeed_fetch::providers::{ApiConfig, HttpAsInfo, HttpOwnership};
use geofeed_fetch::snapshot::Snapshot;
use geofeed_fetch::*;

fn policy() -> FetchPolicy {
    FetchPolicy {
        timeout: Duration::from_secs(5),
        allow_insecure: true,
        per_host_concurrency: 64,
        per_host_delay: Duration::ZERO,
        ..FetchPolicy::default()
    }
}

fn csv(n: usize) -> Vec<u8> {
    let mut out = Vec::new();
    while out.len() < n {
        out.extend_from_slice(b"192.0.2.0/24,US,US-CA,Los Angeles,90007\r\n");
    }
    out
}

fn server(routes: &[(&str, Route)]) -> FixtureServer {
    FixtureServer::start(routes.iter().map(|(p, r)| (p.to_string(), r.clone())).collect()).unwrap()
}

#[test]
fn ok_body_and_digest() {
    let body = csv(2048);
    let s = server(&[("/geofeed.csv", Route::csv(body.clone()))]);
    let o = fetch_locator(&s.url("/geofeed.csv"), &policy()).unwrap();
    match &o.status {
        FetchStatus::Ok { body: got, final_url, content_digest } => {
            assert_eq!(got, &body);
            assert_eq!(final_url, &s.url("/geofeed.csv"));
            assert_eq!(content_digest, &sha256_hex(&body));
        }
        other => panic!("{other:?}"),
    }
    assert_eq!(o.attempts, 1);
}

#[test]
fn http_errors_are_not_retried() {
    let s = server(&[("/gone.csv", Route::status(404)), ("/err.csv", Route::status(503))]);
    let o = fetch_locator(&s.url("/gone.csv"), &policy()).unwrap();
    assert_eq!(o.status, FetchStatus::HttpError { code: 404 });
    assert_eq!((o.attempts, s.hits("/gone.csv")), (1, 1));
    assert_eq!(fetch_locator(&s.url("/err.csv"), &policy()).unwrap().status, FetchStatus::HttpError { code: 503 });
    assert_eq!(fetch_locator(&s.url("/missing.csv"), &policy()).unwrap().status, FetchStatus::HttpError { code: 404 });
}

#[test]
fn unresolvable_host() {
    let o = fetch_locator("https://geofeed.invalid/geofeed.csv", &policy()).unwrap();
    assert_eq!(o.status, FetchStatus::DnsFailure);
    assert_eq!(o.attempts, 1);
}

#[test]
fn connection_errors_retry_up_to_the_limit() {
    let s = server(&[("/drop.csv", Route::Drop)]);
    let p = FetchPolicy { retry_limit: 3, ..policy() };
    let o = fetch_locator(&s.url("/drop.csv"), &p).unwrap();
    assert!(matches!(o.status, FetchStatus::ConnectionError { .. }), "{:?}", o.status);
    assert_eq!(o.attempts, 4);
    assert_eq!(s.hits("/drop.csv"), 4);

    // Nothing listening at all.
    let dead = std::net::TcpListener::bind("127.0.0.1:0").unwrap().local_addr().unwrap();
    let o = fetch_locator(&format!("http://{dead}/x.csv"), &p).unwrap();
    assert!(matches!(o.status, FetchStatus::ConnectionError { .. }));
    assert!(o.attempts <= p.retry_limit + 1);
}

#[test]
fn timeouts() {
    let s = server(&[("/slow.csv", Route::Slow { delay: Duration::from_millis(800), body: csv(10) })]);
    let p = FetchPolicy { timeout: Duration::from_millis(150), retry_limit: 1, ..policy() };
    let o = fetch_locator(&s.url("/slow.csv"), &p).unwrap();
    assert_eq!(o.status, FetchStatus::Timeout);
    assert_eq!(o.attempts, 2);
    assert!(s.hits("/slow.csv") <= 2);
}

#[test]
fn oversized_bodies() {
    let s = server(&[("/big.csv", Route::csv(csv(5000)))]);
    let p = FetchPolicy { max_body: 1000, ..policy() };
    assert_eq!(fetch_locator(&s.url("/big.csv"), &p).unwrap().status, FetchStatus::TooLarge);
    let p = FetchPolicy { max_body: 1 << 20, ..policy() };
    assert!(matches!(fetch_locator(&s.url("/big.csv"), &p).unwrap().status, FetchStatus::Ok { .. }));
}

#[test]
fn scheme_policy() {
    let s = server(&[("/g.csv", Route::csv(csv(10)))]);
    let strict = FetchPolicy { allow_insecure: false, ..policy() };
    let o = fetch_locator(&s.url("/g.csv"), &strict).unwrap();
    assert_eq!(o.status, FetchStatus::SchemeRefused { scheme: "http".into() });
    assert_eq!(s.hits("/g.csv"), 0);
    let o = fetch_locator("ftp://example.com/g.csv", &policy()).unwrap();
    assert_eq!(o.status, FetchStatus::SchemeRefused { scheme: "ftp".into() });
}

#[test]
fn redirects() {
    let s = server(&[
        ("/old.csv", Route::Redirect { status: 301, location: "/new.csv".into() }),
        ("/new.csv", Route::csv(csv(10))),
        ("/loop.csv", Route::Redirect { status: 302, location: "/loop.csv".into() }),
        ("/ftp.csv", Route::Redirect { status: 302, location: "ftp://example.com/x".into() }),
    ]);
    let o = fetch_locator(&s.url("/old.csv"), &policy()).unwrap();
    assert!(matches!(&o.status, FetchStatus::Ok { final_url, .. } if final_url == &s.url("/new.csv")));
    assert_eq!(o.redirects, 1);

    let p = FetchPolicy { redirect_limit: 3, ..policy() };
    let o = fetch_locator(&s.url("/loop.csv"), &p).unwrap();
    assert_eq!(o.status, FetchStatus::HttpError { code: 302 });
    assert_eq!((o.redirects, s.hits("/loop.csv")), (3, 4));

    let o = fetch_locator(&s.url("/ftp.csv"), &policy()).unwrap();
    assert_eq!(o.status, FetchStatus::SchemeRefused { scheme: "ftp".into() });
}

#[test]
fn crawl_summary_matches_construction() {
    let mut routes = HashMap::new();
    let mut urls = Vec::new();
    for i in 0..1547 {
        let path = format!("/{i}.csv");
        routes.insert(path.clone(), if i < 1427 { Route::csv(csv(50)) } else { Route::status(404) });
        urls.push(path);
    }
    let s = FixtureServer::start(routes).unwrap();
    let urls: Vec<String> = urls.iter().map(|p| s.url(p)).collect();
    let r = crawl_corpus(&urls, &FetchPolicy { parallelism: 16, ..policy() }).unwrap();
    assert_eq!((r.summary.total, r.summary.accessible, r.summary.inaccessible), (1547, 1427, 120));
    assert!((r.summary.fraction_inaccessible * 100.0 - 7.76).abs() < 0.01);
    assert_eq!(r.summary.per_status.values().sum::<u64>(), 1547);
    assert_eq!(r.summary.http_codes, BTreeMap::from([(404, 120)]));
    assert_eq!(s.total_hits(), 1547);
}

#[test]
fn crawl_is_order_independent() {
    let s =
        server(&[("/a.csv", Route::csv(csv(10))), ("/b.csv", Route::status(404)), ("/c.csv", Route::status(500)), ("/d.csv", Route::Drop)]);
    let mut urls: Vec<String> = ["/a.csv", "/b.csv", "/c.csv", "/d.csv", "/e.csv"].iter().map(|p| s.url(p)).collect();
    urls.push("https://geofeed.invalid/x.csv".into());
    urls.push(s.url("/a.csv"));
    urls.extend(["/f.csv", "/g.csv", "/h.csv"].iter().map(|p| s.url(p)));
    let p = FetchPolicy { retry_limit: 1, ..policy() };
    let one = crawl_corpus(&urls, &FetchPolicy { parallelism: 1, ..p.clone() }).unwrap();
    let ten = crawl_corpus(&urls, &FetchPolicy { parallelism: 10, ..p }).unwrap();
    assert_eq!(one.summary, ten.summary);
    assert_eq!(one.summary.total, 9);
    let kinds = |r: &CrawlResult| r.outcomes.values().map(|o| o.status.kind()).collect::<Vec<_>>();
    assert_eq!(kinds(&one), kinds(&ten));
}

#[test]
fn empty_crawl() {
    let r = crawl_corpus(&[], &policy()).unwrap();
    assert_eq!((r.summary.total, r.summary.fraction_inaccessible), (0, 0.0));
    assert!(crawl_corpus(&[], &FetchPolicy { parallelism: 0, ..policy() }).is_err());
}

#[test]
fn snapshots_and_offline_crawls() {
    let s = server(&[("/a.csv", Route::csv(csv(100))), ("/b.csv", Route::status(404))]);
    let urls = vec![s.url("/a.csv"), s.url("/b.csv")];
    let live = crawl_corpus(&urls, &policy()).unwrap();
    let dir = tempfile::tempdir().unwrap();
    Snapshot::write(dir.path(), live.outcomes.values()).unwrap();

    let snap = Snapshot::open(dir.path()).unwrap();
    assert_eq!(snap.summary(), live.summary);
    let entry = snap.get(&urls[0]).unwrap();
    let digest = entry.digest.clone().unwrap();
    assert!(dir.path().join(&digest[..2]).join(format!("{digest}.csv")).exists());
    assert_eq!(snap.load_body(entry).unwrap().unwrap(), csv(100));

    let warm = crawl_offline(&urls, Some(&snap));
    assert_eq!((warm.summary.accessible, warm.summary.per_status[&StatusKind::ConnectionError]), (1, 1));
    assert_eq!(warm.outcomes[&urls[0]].body().unwrap(), csv(100).as_slice());
    let cold = crawl_offline(&urls, None);
    assert_eq!(cold.summary.per_status[&StatusKind::ConnectionError], 2);

    std::fs::write(Snapshot::body_path(dir.path(), &digest), b"tampered").unwrap();
    assert!(snap.load_body(snap.get(&urls[0]).unwrap()).is_err());
}

#[test]
fn live_providers_against_fixture() {
    let s = server(&[
        ("/AS1/json", Route::json(r#"{"asn":"AS1","type":"business"}"#)),
        ("/AS2/json", Route::json(r#"{"asn":"AS2","type":"isp"}"#)),
        ("/AS3/json", Route::status(500)),
        ("/120.1.1.0/json", Route::json(r#"{"ip":"120.1.1.0","org":"AS64500 LS Networks"}"#)),
        ("/120.2.0.0/json", Route::json(r#"{"ip":"120.2.0.0","asn":{"asn":"AS7018","name":"AT&T"}}"#)),
    ]);
    let mut cfg = ApiConfig::new(s.url(""));
    cfg.min_interval = Duration::ZERO;
    let info = HttpAsInfo::new(cfg.clone());
    assert_eq!(info.category(1).unwrap(), AsCategory::Business);
    assert_eq!(info.category(1).unwrap(), AsCategory::Business);
    assert_eq!(s.hits("/AS1/json"), 1, "responses are cached");
    let ases = BTreeMap::from([(Rir::Ripe, BTreeSet::from([1, 2, 3, 4]))]);
    let b = as_category_breakdown(&ases, &info);
    assert_eq!(b.per_rir[&Rir::Ripe][&AsCategory::Unknown], 2);

    let owners = HttpOwnership::new(cfg);
    let claims: Vec<OwnershipClaim> = [("120.1.1.0/24", "AS64500"), ("120.2.0.0/16", "AS64500"), ("120.3.0.0/16", "AS1")]
        .iter()
        .map(|(p, o)| OwnershipClaim { prefix: p.parse().unwrap(), claimed_owner: o.to_string() })
        .collect();
    let (_, summary) = compare_ownership(&claims, &owners, MatchRule::Covering).unwrap();
    assert_eq!((summary.matched, summary.incorrect, summary.missing), (1, 1, 1));

    let down = HttpOwnership::new(ApiConfig { timeout: Duration::from_millis(500), ..ApiConfig::new("http://geofeed.invalid") });
    assert!(compare_ownership(&claims, &down, MatchRule::Covering).is_err());
}
