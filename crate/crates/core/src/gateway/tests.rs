use std::sync::Arc;
use std::thread;

use super::*;
use crate::castore::PUBLIC_GATEWAY_RTTS;
use crate::ledger::{StateSnapshot, Transaction};
use crate::market::fixtures::{FixtureCorpus, MITM_DECLARED_MD5};

const ETH: Wei = 1_000_000_000_000_000_000;

fn alice() -> Address {
    Address::from_label("alice")
}

fn config() -> Config {
    let mut config = Config::default();
    config.ledger.allocations.push(AllocationConfig {
        account: "alice".into(),
        balance_wei: 10 * ETH,
    });
    config.admin_token = Some("s3cret".into());
    config
}

fn gateway_with(config: &Config) -> (Gateway, FixtureCorpus) {
    let corpus = FixtureCorpus::standard();
    let gw = Gateway::open(config, MarketEnv::from_corpus(&corpus)).expect("gateway opens");
    (gw, corpus)
}

fn gateway() -> (Gateway, FixtureCorpus) {
    gateway_with(&config())
}

/// Everything an upload may touch.
#[derive(Debug, PartialEq)]
struct Observable {
    ledger: StateSnapshot,
    holdings: BTreeMap<String, (std::collections::BTreeSet<ContentId>, std::collections::BTreeSet<ContentId>)>,
    serials: SerialDb,
    tickets: usize,
}

fn observe(gw: &Gateway) -> Observable {
    Observable {
        ledger: gw.ledger().snapshot(),
        holdings: gw.network().holdings(),
        serials: gw.serial_db(),
        tickets: gw.fee_book().used_count(),
    }
}

#[test]
fn upload_stores_bytes_and_indexes_record() {
    let (gw, corpus) = gateway();
    let app = corpus.app("anchor-md5").unwrap();
    let result = gw.upload(&UploadRequest::new(&app.page_url)).unwrap();

    assert_eq!(result.package_name, app.package);
    assert_eq!(result.verdict.channel, VerdictChannel::ChecksumVerified);
    assert_eq!(result.repack_verdict, RepackVerdict::Pass);
    assert_eq!(result.origin_url, app.page_url);
    assert_eq!(result.content_id, ContentId::of(&app.apk));

    let stored = gw.app(&app.package, &app.version).unwrap().expect("on chain");
    assert_eq!(stored.record.content_id, result.content_id);
    assert_eq!(stored.block, result.block);
    let held = gw.network().inspect(gw.server_node(), |n| n.is_pinned(&result.content_id));
    assert!(held.unwrap());
}

#[test]
fn every_standard_app_gets_its_expected_verdict() {
    let (gw, corpus) = gateway();
    for app in corpus.apps() {
        let outcome = gw.upload(&UploadRequest::new(&app.page_url));
        let mitm = app.download_url.contains(MITM_DECLARED_MD5);
        match outcome {
            Ok(result) => {
                assert!(!mitm, "mitm case admitted");
                let expected = match app.market_id.as_str() {
                    "anchor-md5" | "query-md5" | "path-md5" | "script-md5" => VerdictChannel::ChecksumVerified,
                    "github" => VerdictChannel::HttpsDirect,
                    "https-upgrade" => VerdictChannel::HttpsRewritten,
                    "plain-b" => VerdictChannel::KnownDeveloperMatch,
                    "plain-a" if app.package == "com.fixture.unvetted" => VerdictChannel::UnverifiedWarning,
                    "plain-a" => VerdictChannel::KnownAppMatch,
                    other => panic!("unexpected market {other}"),
                };
                assert_eq!(result.verdict.channel, expected, "{}", app.page_url);
                assert_eq!(is_flagged(&result.origin_url), expected == VerdictChannel::UnverifiedWarning);
            }
            Err(GatewayError::SecurityRejected(v)) => {
                assert!(mitm, "{} rejected: {v}", app.page_url);
                assert_eq!(v.channel, VerdictChannel::Rejected);
            }
            Err(other) => panic!("{}: {other}", app.page_url),
        }
    }
    assert_eq!(gw.registry().records().unwrap().len(), corpus.apps().len() - 1);
}

fn is_flagged(url: &str) -> bool {
    crate::market::is_flagged_unverified(url)
}

#[test]
fn unofficial_serial_is_stored_with_failing_repack_verdict() {
    let mut corpus = FixtureCorpus::standard();
    let official = corpus.app("query-md5").unwrap().clone();
    let fake = corpus.publish("query-md5", &official.package, "2.0", 0xbad_u32);
    let gw = Gateway::open(&config(), MarketEnv::from_corpus(&corpus)).unwrap();
    let result = gw.upload(&UploadRequest::new(&fake.page_url)).unwrap();
    assert_eq!(result.repack_verdict, RepackVerdict::Fail);
    assert!(result.repack_detail.contains("0xbad"), "{}", result.repack_detail);
}

#[test]
fn duplicate_upload_is_refused_without_state_change() {
    let (gw, corpus) = gateway();
    let app = corpus.app("path-md5").unwrap();
    gw.upload(&UploadRequest::new(&app.page_url)).unwrap();
    let before = observe(&gw);
    match gw.upload(&UploadRequest::new(&app.page_url)) {
        Err(GatewayError::Duplicate { package, version }) => {
            assert_eq!((package.as_str(), version.as_str()), (app.package.as_str(), "1.0"));
        }
        other => panic!("{other:?}"),
    }
    assert_eq!(observe(&gw), before);
}

#[test]
fn mitm_rejection_leaves_no_trace() {
    let (gw, corpus) = gateway();
    let before = observe(&gw);
    let app = corpus.mitm_app().unwrap();
    let err = gw.upload(&UploadRequest::new(&app.page_url)).unwrap_err();
    let GatewayError::SecurityRejected(verdict) = err else {
        panic!("{err:?}");
    };
    assert!(verdict.detail.contains(MITM_DECLARED_MD5), "{}", verdict.detail);
    assert_eq!(observe(&gw), before);
}

#[test]
fn tampering_in_transit_is_caught() {
    let (gw, corpus) = gateway();
    corpus.web.intercept_http(|_, body| {
        if body.starts_with(b"PK") {
            body.extend_from_slice(b"injected");
        }
    });
    let app = corpus.app("query-md5").unwrap();
    let before = observe(&gw);
    assert!(matches!(
        gw.upload(&UploadRequest::new(&app.page_url)),
        Err(GatewayError::SecurityRejected(_))
    ));
    assert_eq!(observe(&gw), before);
}

#[test]
fn retrieval_and_request_errors_map_to_kinds() {
    let (gw, corpus) = gateway();
    assert!(matches!(gw.upload(&UploadRequest::new("")), Err(GatewayError::InvalidRequest(_))));
    assert!(matches!(
        gw.upload(&UploadRequest::new("not a url")),
        Err(GatewayError::InvalidRequest(_))
    ));
    assert!(matches!(
        gw.upload(&UploadRequest::new("https://unknown.example/app/1")),
        Err(GatewayError::UnknownMarket(_))
    ));
    let app = corpus.app("anchor-md5").unwrap();
    corpus.web.remove(&app.download_url);
    assert!(matches!(
        gw.upload(&UploadRequest::new(&app.page_url)),
        Err(GatewayError::RetrievalFailed(_))
    ));
}

#[test]
fn unwhitelisted_server_cannot_store() {
    let (gw, corpus) = gateway();
    gw.whitelist_remove(gw.server()).unwrap();
    let before = observe(&gw);
    let app = corpus.app("script-md5").unwrap();
    assert!(matches!(
        gw.upload(&UploadRequest::new(&app.page_url)),
        Err(GatewayError::NotWhitelisted(_))
    ));
    assert_eq!(observe(&gw), before);
    gw.whitelist_add(gw.server()).unwrap();
    gw.upload(&UploadRequest::new(&app.page_url)).unwrap();
}

#[test]
fn concurrent_uploads_of_one_app_store_it_once() {
    let (gw, corpus) = gateway();
    let gw = Arc::new(gw);
    let url = corpus.app("anchor-md5").unwrap().page_url.clone();
    let outcomes: Vec<_> = (0..20)
        .map(|_| {
            let (gw, url) = (gw.clone(), url.clone());
            thread::spawn(move || gw.upload(&UploadRequest::new(url)))
        })
        .collect::<Vec<_>>()
        .into_iter()
        .map(|h| h.join().unwrap())
        .collect();
    let ok = outcomes.iter().filter(|o| o.is_ok()).count();
    let dup = outcomes
        .iter()
        .filter(|o| matches!(o, Err(GatewayError::Duplicate { .. })))
        .count();
    assert_eq!((ok, dup), (1, 19));
    let logs = gw
        .ledger()
        .find_logs(0, gw.ledger().head(), crate::registry::event_topic())
        .unwrap();
    assert_eq!(logs.len(), 1);
}

fn donate(gw: &Gateway, value: Wei) -> H256 {
    gw.registry().donate(alice(), value).unwrap().tx_id
}

#[test]
fn fee_is_required_and_checked_when_enabled() {
    let mut cfg = config();
    cfg.fees.enabled = true;
    let (gw, corpus) = gateway_with(&cfg);
    let app = corpus.app("anchor-md5").unwrap();
    let req = UploadRequest::new(&app.page_url);
    assert!(matches!(gw.upload(&req), Err(GatewayError::FeeRequired)));

    let estimate = gw.estimate_fee(&req).unwrap();
    assert_eq!(estimate.fee, estimate.gas as Wei * estimate.gas_price);

    let unknown = crate::hash::keccak256(b"nothing");
    let low = donate(&gw, estimate.fee - 1);
    let nonce = gw.ledger().nonce(&alice());
    let elsewhere = gw
        .ledger()
        .submit(Transaction::new(alice(), Address::from_label("bob"), nonce).with_value(estimate.fee))
        .unwrap()
        .tx_id;
    for (tx, condition) in [(unknown, "unknownTx"), (elsewhere, "wrongDestination"), (low, "insufficientValue")] {
        match gw.upload(&req.clone().with_fee(tx)) {
            Err(GatewayError::FeeRejected(r)) => assert_eq!(r.condition(), condition),
            other => panic!("{other:?}"),
        }
    }

    let paid = donate(&gw, 2 * estimate.fee);
    let before = gw.registry().balance();
    let result = gw.upload(&req.clone().with_fee(paid)).unwrap();
    assert!(result.gas_used <= estimate.gas, "{} > {}", result.gas_used, estimate.gas);
    assert_eq!(result.fee_ticket.unwrap().payer, alice());
    assert_eq!(gw.registry().balance(), before);

    let other = corpus.app("query-md5").unwrap();
    match gw.upload(&UploadRequest::new(&other.page_url).with_fee(paid)) {
        Err(GatewayError::FeeRejected(r)) => assert_eq!(r.condition(), "alreadyUsed"),
        other => panic!("{other:?}"),
    }
}

#[test]
fn failed_upload_releases_its_fee_ticket() {
    let mut cfg = config();
    cfg.fees.enabled = true;
    let (gw, corpus) = gateway_with(&cfg);
    let app = corpus.app("anchor-md5").unwrap();
    let req = UploadRequest::new(&app.page_url);
    let fee = gw.estimate_fee(&req).unwrap().fee;
    let tx = donate(&gw, fee);
    gw.whitelist_remove(gw.server()).unwrap();
    assert!(gw.upload(&req.clone().with_fee(tx)).is_err());
    assert!(!gw.fee_book().is_used(&tx));
    gw.whitelist_add(gw.server()).unwrap();
    gw.upload(&req.with_fee(tx)).unwrap();
    assert!(gw.fee_book().is_used(&tx));
}

#[test]
fn one_donation_pays_for_one_upload_under_contention() {
    let mut cfg = config();
    cfg.fees.enabled = true;
    let mut corpus = FixtureCorpus::standard();
    let urls: Vec<String> = (0..50)
        .map(|i| corpus.publish("query-md5", &format!("com.race.app{i}"), "1.0", 0x1000u32 + i).page_url)
        .collect();
    let gw = Arc::new(Gateway::open(&cfg, MarketEnv::from_corpus(&corpus)).unwrap());
    let fee = gw.estimate_fee(&UploadRequest::new(&urls[0])).unwrap().fee;
    let tx = donate(&gw, fee);
    let outcomes: Vec<_> = urls
        .into_iter()
        .map(|url| {
            let gw = gw.clone();
            thread::spawn(move || gw.upload(&UploadRequest::new(url).with_fee(tx)))
        })
        .collect::<Vec<_>>()
        .into_iter()
        .map(|h| h.join().unwrap())
        .collect();
    assert_eq!(outcomes.iter().filter(|o| o.is_ok()).count(), 1);
    assert!(outcomes
        .iter()
        .filter_map(|o| o.as_ref().err())
        .all(|e| matches!(e, GatewayError::FeeRejected(FeeRejection::AlreadyUsed { .. }))));
}

#[test]
fn donation_moves_exactly_value_plus_gas() {
    let (gw, _) = gateway();
    let (payer_before, contract_before) = (gw.ledger().balance(&alice()), gw.registry().balance());
    let receipt = gw.registry().donate(alice(), 12_345).unwrap();
    let gas_cost = receipt.gas_used as Wei * gw.ledger().gas_price();
    assert_eq!(gw.ledger().balance(&alice()), payer_before - 12_345 - gas_cost);
    assert_eq!(gw.registry().balance(), contract_before + 12_345);
}

#[test]
fn verify_fee_consumes_a_ticket_once() {
    let (gw, _) = gateway();
    let tx = donate(&gw, 1000);
    assert_eq!(gw.verify_fee(tx, 1000).unwrap().value, 1000);
    assert_eq!(gw.verify_fee(tx, 1000).unwrap_err().condition(), "alreadyUsed");
}

#[test]
fn download_returns_uploaded_bytes_without_transactions() {
    let (gw, corpus) = gateway();
    let app = corpus.app("github").unwrap();
    gw.upload(&UploadRequest::new(&app.page_url)).unwrap();
    let before = gw.ledger().snapshot();
    for _ in 0..100 {
        let got = gw.download(&app.package, &app.version).unwrap();
        assert_eq!(got.bytes, app.apk);
        assert_eq!(got.record.package_name, app.package);
    }
    assert_eq!(gw.ledger().snapshot(), before);
}

#[test]
fn download_uses_fastest_reachable_gateway() {
    let (gw, corpus) = gateway();
    let app = corpus.app("github").unwrap();
    gw.upload(&UploadRequest::new(&app.page_url)).unwrap();
    let fastest = PUBLIC_GATEWAY_RTTS
        .iter()
        .min_by(|a, b| a.3.total_cmp(&b.3).then(a.0.cmp(b.0)))
        .unwrap()
        .0;
    assert_eq!(gw.download(&app.package, &app.version).unwrap().served_by.name, fastest);
    gw.network().set_online(fastest, false).unwrap();
    let next = gw.download(&app.package, &app.version).unwrap().served_by;
    assert_ne!(next.name, fastest);
    assert!(next.reachable);
}

#[test]
fn download_of_unknown_app_is_not_on_chain() {
    let (gw, _) = gateway();
    assert!(matches!(gw.download("com.nope", "1"), Err(GatewayError::NotOnChain { .. })));
}

#[test]
fn content_survives_origin_loss_after_sync() {
    let (gw, corpus) = gateway();
    let app = corpus.app("anchor-md5").unwrap();
    gw.upload(&UploadRequest::new(&app.page_url)).unwrap();
    let reports = gw.sync().unwrap();
    assert_eq!(reports[0].1.newly_pinned.len(), 1);
    gw.network().set_online(gw.server_node(), false).unwrap();
    gw.advance(Duration::from_secs(3 * 3600));
    assert_eq!(gw.download(&app.package, &app.version).unwrap().bytes, app.apk);
}

#[test]
fn phase_timings_cover_the_upload() {
    let (gw, corpus) = gateway();
    let mut runs = Vec::new();
    for app in corpus.apps().iter().filter(|a| a.market_id != "anchor-md5" || a.package != "com.fixture.mitm") {
        if let Ok((_, t)) = gw.upload_timed(&UploadRequest::new(&app.page_url)) {
            assert!(t.phase_sum() <= t.total);
            runs.push(t);
        }
    }
    let report = timing_report(&runs).unwrap();
    assert_eq!(report.runs, runs.len());
    assert!(report.to_table().lines().count() > 1);
}

#[test]
fn estimate_does_not_fetch_or_transact() {
    let (gw, corpus) = gateway();
    let app = corpus.app("anchor-md5").unwrap();
    let requests = corpus.web.requests();
    let before = gw.ledger().snapshot();
    let est = gw.estimate_fee(&UploadRequest::new(&app.page_url)).unwrap();
    assert!(est.gas > 21_000);
    assert_eq!(corpus.web.requests(), requests);
    assert_eq!(gw.ledger().snapshot(), before);
    assert!(matches!(
        gw.estimate_fee(&UploadRequest::new("https://elsewhere.example/x")),
        Err(GatewayError::UnknownMarket(_))
    ));
}

#[test]
fn admin_token_comparison() {
    let (gw, _) = gateway();
    assert!(gw.admin_authorized(Some("s3cret")));
    assert!(!gw.admin_authorized(Some("s3creT")));
    assert!(!gw.admin_authorized(Some("s3")));
    assert!(!gw.admin_authorized(None));
}

#[test]
fn serial_import_affects_later_verdicts() {
    let mut corpus = FixtureCorpus::standard();
    let app = corpus.publish("query-md5", "com.late.official", "1.0", 0x77u32);
    let gw = Gateway::open(&config(), MarketEnv::from_corpus(&corpus)).unwrap();
    let mut db = SerialDb::new();
    db.insert("com.late.official", BigUint::from(0x78u32));
    assert_eq!(gw.import_serials(&db).unwrap().len(), 1);
    assert_eq!(gw.import_serials(&db).unwrap().len(), 0);
    let result = gw.upload(&UploadRequest::new(&app.page_url)).unwrap();
    assert_eq!(result.repack_verdict, RepackVerdict::Fail);
}

#[test]
fn state_persists_across_reopen() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = config();
    cfg.data_dir = Some(dir.path().to_path_buf());
    cfg.fees.enabled = true;
    let corpus = FixtureCorpus::standard();
    let app = corpus.app("anchor-md5").unwrap().clone();
    let tx = {
        let gw = Gateway::open(&cfg, MarketEnv::from_corpus(&corpus)).unwrap();
        let req = UploadRequest::new(&app.page_url);
        let tx = donate(&gw, gw.estimate_fee(&req).unwrap().fee);
        gw.upload(&req.with_fee(tx)).unwrap();
        let mut db = SerialDb::new();
        db.insert("com.extra", BigUint::from(5u32));
        gw.import_serials(&db).unwrap();
        tx
    };
    let gw = Gateway::open(&cfg, MarketEnv::from_corpus(&corpus)).unwrap();
    assert_eq!(gw.download(&app.package, &app.version).unwrap().bytes, app.apk);
    assert!(gw.fee_book().is_used(&tx));
    assert!(gw.serial_db().contains("com.extra", &BigUint::from(5u32)));
    assert_eq!(gw.registry().records().unwrap().len(), 1);
}

#[test]
fn oversized_identity_is_rejected_before_storing() {
    let mut corpus = FixtureCorpus::standard();
    let long = format!("com.{}", "x".repeat(200));
    let app = corpus.publish("query-md5", &long, "1.0", 1u32);
    let gw = Gateway::open(&config(), MarketEnv::from_corpus(&corpus)).unwrap();
    let before = observe(&gw);
    assert!(matches!(
        gw.upload(&UploadRequest::new(&app.page_url)),
        Err(GatewayError::InvalidApk(_))
    ));
    assert_eq!(observe(&gw), before);
}

#[test]
fn config_round_trips_and_validates() {
    let cfg = config();
    let text = cfg.to_toml();
    assert_eq!(Config::from_toml(&text).unwrap(), cfg);

    let parsed = Config::from_toml(
        r#"
        listen = "0.0.0.0:9000"
        [castore]
        ttl = "1h"
        refresh_period = "20m"
        "#,
    )
    .unwrap();
    assert_eq!(parsed.castore.ttl, Duration::from_secs(3600));
    assert_eq!(parsed.castore.gateways.len(), 21);

    let bad = "[castore]\nttl = \"10m\"\nrefresh_period = \"10m\"\n";
    assert!(matches!(Config::from_toml(bad), Err(GatewayError::Config(_))));
    let dup = "[castore]\npinners = [\"server-node\"]\n";
    assert!(matches!(Config::from_toml(dup), Err(GatewayError::Config(_))));
}
