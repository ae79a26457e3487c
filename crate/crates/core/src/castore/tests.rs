use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;
use std::time::Duration;

use num_bigint::BigUint;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::hash::Address;
use crate::ledger::{Genesis, Ledger};
use crate::registry::{AppRecord, ExecutionOverhead, Registry, RepackVerdict};

const MIN: Duration = Duration::from_secs(60);

fn net() -> Network {
    let network = Network::new(SimClock::new());
    network.add_node("origin", NodeKind::Origin);
    network.add_node("gw", NodeKind::Gateway);
    network
}

#[test]
fn add_then_fetch_round_trips() {
    let network = net();
    let cid = network.add("origin", b"apk bytes").unwrap();
    assert_eq!(network.fetch(&cid, "gw").unwrap(), b"apk bytes");
    network.add_node("origin2", NodeKind::Origin);
    assert_eq!(network.add("origin2", b"apk bytes").unwrap(), cid);
}

#[test]
fn add_to_offline_node_fails() {
    let network = net();
    network.set_online("origin", false).unwrap();
    assert!(matches!(
        network.add("origin", b"x"),
        Err(CastoreError::NodeOffline(_))
    ));
}

#[test]
fn empty_content_has_fixed_id() {
    let network = net();
    let cid = network.add("origin", b"").unwrap();
    assert_eq!(
        hex::encode(cid.digest()),
        "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855"
    );
}

#[test]
fn fetch_installs_gateway_cache() {
    let network = net();
    let cid = network.add("origin", b"x").unwrap();
    assert!(network.inspect("gw", |n| n.cache_entry(&cid)).unwrap().is_none());
    network.fetch(&cid, "gw").unwrap();
    let entry = network.inspect("gw", |n| n.cache_entry(&cid)).unwrap().unwrap();
    assert_eq!(entry.ttl, Network::DEFAULT_TTL);
    assert_eq!(entry.cached_at, 0);
}

#[test]
fn origin_loss_without_prior_request_is_total() {
    let network = net();
    let cid = network.add("origin", b"x").unwrap();
    network.set_online("origin", false).unwrap();
    assert_eq!(network.fetch(&cid, "gw"), Err(CastoreError::NotFound(cid)));
}

#[test]
fn cached_copy_survives_origin_loss_within_ttl() {
    let network = net();
    let cid = network.add("origin", b"x").unwrap();
    network.fetch(&cid, "gw").unwrap();
    network.set_online("origin", false).unwrap();
    network.clock().advance(29 * MIN);
    assert!(network.fetch(&cid, "gw").is_ok());
    network.clock().advance(31 * MIN);
    network.gc_all();
    assert_eq!(network.fetch(&cid, "gw"), Err(CastoreError::NotFound(cid)));
}

#[test]
fn fetch_rules_for_via_node() {
    let network = net();
    let cid = network.add("origin", b"x").unwrap();
    assert!(matches!(
        network.fetch(&cid, "origin"),
        Err(CastoreError::NotAGateway(_))
    ));
    network.set_online("gw", false).unwrap();
    assert!(matches!(
        network.fetch(&cid, "gw"),
        Err(CastoreError::NodeOffline(_))
    ));
    assert!(matches!(
        network.fetch(&cid, "nope"),
        Err(CastoreError::UnknownNode(_))
    ));
}

#[test]
fn gc_evicts_only_expired_unpinned() {
    let network = net();
    let a = network.add("origin", b"a").unwrap();
    let b = network.add("origin", b"b").unwrap();
    network.fetch(&a, "gw").unwrap();
    network.fetch(&b, "gw").unwrap();
    network.pin("gw", b).unwrap();

    network.clock().advance(30 * MIN);
    assert!(network.gc("gw").unwrap().is_empty(), "ttl not yet exceeded");
    network.clock().advance(Duration::from_millis(1));
    assert_eq!(network.gc("gw").unwrap(), BTreeSet::from([a]));

    network.clock().advance(1000 * MIN);
    assert!(network.gc("gw").unwrap().is_empty());
    assert!(network.inspect("gw", |n| n.is_pinned(&b)).unwrap());
    assert!(network.gc("origin").unwrap().is_empty());
}

#[test]
fn refresh_at_half_ttl_keeps_content_alive() {
    let network = net();
    let cid = network.add("origin", b"x").unwrap();
    let mut daemons = vec![RefreshDaemon::new(vec![cid], vec!["gw".into()], 15 * MIN)];
    daemons[0].check_period(&network).unwrap();
    advance_with_refresh(&network, &mut daemons, MIN);
    network.set_online("origin", false).unwrap();
    for _ in 0..10 {
        let report = advance_with_refresh(&network, &mut daemons, 30 * MIN);
        assert!(report.failures.is_empty(), "{report:?}");
        assert!(network.inspect("gw", |n| n.holds(&cid, network.now())).unwrap());
    }
    assert!(network.fetch(&cid, "gw").is_ok());
}

#[test]
fn refresh_slower_than_ttl_loses_content() {
    let network = net();
    let cid = network.add("origin", b"x").unwrap();
    let mut daemons = vec![RefreshDaemon::new(vec![cid], vec!["gw".into()], 45 * MIN)];
    assert!(matches!(
        daemons[0].check_period(&network),
        Err(CastoreError::RefreshTooSlow { .. })
    ));
    advance_with_refresh(&network, &mut daemons, MIN);
    network.set_online("origin", false).unwrap();
    advance_with_refresh(&network, &mut daemons, 300 * MIN);
    assert!(!network.is_available(&cid));
}

#[test]
fn refresh_continues_past_offline_gateway() {
    let network = net();
    network.add_node("gw2", NodeKind::Gateway);
    let cid = network.add("origin", b"x").unwrap();
    network.set_online("gw", false).unwrap();
    let daemon = RefreshDaemon::new(vec![cid], vec!["gw".into(), "gw2".into()], 10 * MIN);
    let report = daemon.run_cycle(&network);
    assert_eq!(report.fetched, 1);
    assert_eq!(report.failures.len(), 1);
    assert!(network.inspect("gw2", |n| n.cache_entry(&cid).is_some()).unwrap());
}

#[test]
fn corrupted_provider_is_detected() {
    let network = net();
    let cid = network.add("origin", b"payload").unwrap();
    network.corrupt("origin", cid).unwrap();
    assert_eq!(
        network.fetch(&cid, "gw"),
        Err(CastoreError::IntegrityMismatch(cid))
    );
    assert!(network.inspect("gw", |n| n.cache_entry(&cid)).unwrap().is_none());

    // an honest second provider wins
    network.add_node("origin2", NodeKind::Origin);
    network.add("origin2", b"payload").unwrap();
    assert_eq!(network.fetch(&cid, "gw").unwrap(), b"payload");
}

fn registry_with(apps: &[&[u8]], network: &Network) -> Registry {
    let owner = Address::from_label("owner");
    let server = Address::from_label("server");
    let ledger = Arc::new(Ledger::new(
        &Genesis::new(Genesis::ONE_GWEI).fund(owner, 10u128.pow(20)).fund(server, 10u128.pow(20)),
    ));
    let registry = Registry::deploy(ledger, Address::from_label("registry"), owner, ExecutionOverhead::default());
    registry.whitelist_add(owner, server).unwrap();
    for (i, bytes) in apps.iter().enumerate() {
        let cid = network.add("origin", bytes).unwrap();
        registry
            .store_app(
                server,
                &AppRecord {
                    package_name: format!("com.app{i}"),
                    version: "1".into(),
                    cert_serial: BigUint::from(1u8),
                    origin_url: "http://m/x".into(),
                    repack_verdict: RepackVerdict::Pass,
                    content_id: cid,
                },
            )
            .unwrap();
    }
    registry
}

#[test]
fn consortium_sync_pins_everything_once() {
    let network = net();
    network.add_node("pinner", NodeKind::Pinner);
    let registry = registry_with(&[b"one", b"two", b"three"], &network);

    let oracle: BTreeSet<ContentId> = registry
        .ledger()
        .find_logs(0, registry.ledger().head(), crate::registry::event_topic())
        .unwrap()
        .into_iter()
        .map(|(_, log)| AppRecord::decode(&log.data).unwrap().content_id)
        .collect();

    let first = consortium_sync(&network, "pinner", &registry).unwrap();
    assert_eq!(first.newly_pinned, oracle);
    assert_eq!(first.newly_pinned.len(), 3);
    let second = consortium_sync(&network, "pinner", &registry).unwrap();
    assert!(second.newly_pinned.is_empty());
    assert_eq!(second.indexed, 3);

    network.set_online("origin", false).unwrap();
    network.set_online("gw", false).unwrap();
    for cid in &oracle {
        assert!(network.fetch(cid, "pinner").is_ok());
    }
}

#[test]
fn consortium_sync_reports_partial_failures() {
    let network = net();
    network.add_node("pinner", NodeKind::Pinner);
    let registry = registry_with(&[b"one", b"two"], &network);
    let gone = ContentId::of(b"two");
    // make "two" unavailable by removing its only holder
    network.add_node("origin-b", NodeKind::Origin);
    network.add("origin-b", b"one").unwrap();
    network.set_online("origin", false).unwrap();
    let report = consortium_sync(&network, "pinner", &registry).unwrap();
    assert_eq!(report.newly_pinned, BTreeSet::from([ContentId::of(b"one")]));
    assert_eq!(report.failures.len(), 1);
    assert_eq!(report.failures[0].0, gone);

    network.set_online("pinner", false).unwrap();
    assert!(consortium_sync(&network, "pinner", &registry).is_err());
}

/// Independent model of the availability rule for the churn simulation.
#[derive(Default)]
struct Model {
    online: BTreeMap<String, bool>,
    pinned: BTreeMap<String, BTreeSet<usize>>,
    cached: BTreeMap<String, BTreeMap<usize, u64>>,
    ttl_ms: u64,
}

impl Model {
    fn available(&self, item: usize, now: u64) -> bool {
        self.online.iter().any(|(node, up)| {
            *up && (self.pinned[node].contains(&item)
                || self.cached[node]
                    .get(&item)
                    .is_some_and(|t| now - t <= self.ttl_ms))
        })
    }
}

#[test]
fn churn_matches_availability_law() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let ttl = 30 * MIN;
    let network = Network::with_ttl(SimClock::new(), ttl);
    let nodes = [
        ("o1", NodeKind::Origin),
        ("o2", NodeKind::Origin),
        ("g1", NodeKind::Gateway),
        ("g2", NodeKind::Gateway),
        ("g3", NodeKind::Gateway),
        ("p1", NodeKind::Pinner),
    ];
    let mut model = Model {
        ttl_ms: ttl.as_millis() as u64,
        ..Model::default()
    };
    for (id, kind) in nodes {
        network.add_node(id, kind);
        model.online.insert(id.into(), true);
        model.pinned.insert(id.into(), BTreeSet::new());
        model.cached.insert(id.into(), BTreeMap::new());
    }
    let items: Vec<Vec<u8>> = (0..8).map(|i| format!("app-{i}").into_bytes()).collect();
    let cids: Vec<ContentId> = items.iter().map(|b| ContentId::of(b)).collect();
    let via_nodes = ["g1", "g2", "g3", "p1"];

    let mut fetches = 0;
    for _ in 0..10_000 {
        let now = network.now();
        match rng.gen_range(0..100) {
            0..=9 => {
                let (node, _) = nodes[rng.gen_range(0..nodes.len())];
                let item = rng.gen_range(0..items.len());
                let result = network.add(node, &items[item]);
                assert_eq!(result.is_ok(), model.online[node]);
                if result.is_ok() {
                    model.pinned.get_mut(node).unwrap().insert(item);
                }
            }
            10..=59 => {
                let via = via_nodes[rng.gen_range(0..via_nodes.len())];
                let item = rng.gen_range(0..items.len());
                let expected = model.online[via] && model.available(item, now);
                let result = network.fetch(&cids[item], via);
                assert_eq!(result.is_ok(), expected, "fetch {item} via {via} at {now}");
                if let Ok(bytes) = result {
                    assert!(cids[item].verifies(&bytes));
                    model.cached.get_mut(via).unwrap().insert(item, now);
                    fetches += 1;
                } else if model.online[via] {
                    assert_eq!(result, Err(CastoreError::NotFound(cids[item])));
                }
            }
            60..=74 => {
                let (node, _) = nodes[rng.gen_range(0..nodes.len())];
                let up = rng.gen_bool(0.6);
                network.set_online(node, up).unwrap();
                model.online.insert(node.into(), up);
            }
            75..=94 => {
                network.clock().advance(Duration::from_secs(rng.gen_range(1..900)));
            }
            _ => {
                let (node, _) = nodes[rng.gen_range(0..nodes.len())];
                network.gc(node).unwrap();
            }
        }
        let now = network.now();
        for (item, cid) in cids.iter().enumerate() {
            assert_eq!(network.is_available(cid), model.available(item, now));
        }
    }
    assert!(fetches > 1000);
}

#[test]
fn pinned_content_survives_any_gc_sequence() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let network = net();
    network.add_node("pinner", NodeKind::Pinner);
    let cid = network.add("origin", b"pinned").unwrap();
    network.fetch_and_pin("pinner", &cid).unwrap();
    for _ in 0..500 {
        network.clock().advance(Duration::from_secs(rng.gen_range(0..100_000)));
        for node in ["origin", "gw", "pinner"] {
            network.gc(node).unwrap();
        }
    }
    assert!(network.inspect("pinner", |n| n.is_pinned(&cid)).unwrap());
    assert!(network.inspect("origin", |n| n.is_pinned(&cid)).unwrap());
    assert!(network.fetch(&cid, "pinner").is_ok());
}

#[test]
fn scenario_file_drives_network() {
    let outcome = scenario::run_text(
        "\
node origin origin
node gw gateway ttl=30m
add origin app bytes of the app
fetch gw app expect ok
offline origin
tick 20m
fetch gw app expect ok
tick 31m
fetch gw app expect notfound
expect app unavailable
",
    )
    .unwrap();
    assert!(outcome.all_passed(), "{:?}", outcome.failures().collect::<Vec<_>>());
    assert_eq!(outcome.checks.len(), 4);
}

#[test]
fn scenario_reports_failed_expectations() {
    let outcome = scenario::run_text(
        "node origin origin\nnode gw gateway\nadd origin a x\noffline origin\nfetch gw a expect ok\n",
    )
    .unwrap();
    assert!(!outcome.all_passed());
    assert_eq!(outcome.failures().next().unwrap().line, 5);
}
