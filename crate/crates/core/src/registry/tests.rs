use std::sync::Arc;

use num_bigint::BigUint;

use super::*;
use crate::castore::ContentId;
use crate::hash::Address;
use crate::ledger::{Genesis, GasSchedule, Ledger, TxStatus};

struct Fixture {
    registry: Registry,
    owner: Address,
    server: Address,
    stranger: Address,
}

fn fixture() -> Fixture {
    let owner = Address::from_label("owner");
    let server = Address::from_label("server");
    let stranger = Address::from_label("stranger");
    let ether = 10u128.pow(18);
    let genesis = Genesis::new(Genesis::ONE_GWEI)
        .fund(owner, 100 * ether)
        .fund(server, 100 * ether)
        .fund(stranger, 100 * ether);
    let ledger = Arc::new(Ledger::new(&genesis));
    let registry = Registry::deploy(
        ledger,
        Address::from_label("registry"),
        owner,
        ExecutionOverhead::default(),
    );
    registry.whitelist_add(owner, server).unwrap();
    Fixture {
        registry,
        owner,
        server,
        stranger,
    }
}

fn record(n: u32) -> AppRecord {
    AppRecord {
        package_name: format!("com.example.app{n}"),
        version: "1.0.3".into(),
        cert_serial: BigUint::from(0x706a633eu32 + n),
        origin_url: format!("http://market.example/detail/{n}"),
        repack_verdict: RepackVerdict::Pass,
        content_id: ContentId::of(&n.to_be_bytes()),
    }
}

/// Gas for a single log-path upload, from the schedule alone.
fn expected_store_gas(r: &AppRecord) -> u64 {
    let s = GasSchedule::ETHEREUM;
    let o = ExecutionOverhead::default();
    let encoded = r.encode().unwrap();
    let mut calldata = Function::StoreApp.selector().to_vec();
    calldata.extend_from_slice(&encoded);
    let calldata_gas: u64 = calldata
        .iter()
        .map(|b| if *b == 0 { 4 } else { 16 })
        .sum();
    21_000 + calldata_gas + s.sload + o.upload_call + o.upload_record + 375 + 2 * 375
        + 8 * encoded.len() as u64
}

#[test]
fn store_app_emits_one_log_with_exact_gas() {
    let f = fixture();
    let r = record(1);
    let receipt = f.registry.store_app(f.server, &r).unwrap();
    assert_eq!(receipt.logs.len(), 1);
    assert_eq!(receipt.gas_used, expected_store_gas(&r));
    assert!(receipt.gas_used < 100_000);

    let log = &receipt.logs[0];
    assert_eq!(log.topics[0], event_topic());
    assert_eq!(log.topics[1], identity_topic("com.example.app1", "1.0.3"));
    assert_eq!(AppRecord::decode(&log.data).unwrap(), r);
}

#[test]
fn store_app_writes_no_storage() {
    let f = fixture();
    let before = f.registry.ledger().snapshot().storage;
    f.registry.store_app(f.server, &record(1)).unwrap();
    assert_eq!(f.registry.ledger().snapshot().storage, before);
}

#[test]
fn non_whitelisted_caller_reverts_without_log() {
    let f = fixture();
    let head = f.registry.ledger().head();
    let err = f.registry.store_app(f.stranger, &record(1)).unwrap_err();
    assert!(matches!(err, RegistryError::NotWhitelisted));
    assert_eq!(f.registry.ledger().head(), head);
    assert!(f.registry.records().unwrap().is_empty());
}

#[test]
fn duplicates_are_not_checked_on_chain() {
    let f = fixture();
    f.registry.store_app(f.server, &record(1)).unwrap();
    f.registry.store_app(f.server, &record(1)).unwrap();
    assert_eq!(f.registry.find("com.example.app1", "1.0.3").unwrap().len(), 2);
}

#[test]
fn malformed_calldata_reverts() {
    let f = fixture();
    let mut calldata = calldata::store_app(&record(1).encode().unwrap());
    calldata.truncate(calldata.len() - 3);
    let ledger = f.registry.ledger();
    let tx = crate::ledger::Transaction::new(f.server, f.registry.address(), ledger.nonce(&f.server))
        .with_calldata(calldata);
    let err: RegistryError = ledger.submit(tx).unwrap_err().into();
    assert!(matches!(err, RegistryError::MalformedRecord(_)));

    let mut bad = record(1);
    bad.version.clear();
    assert!(matches!(
        f.registry.store_app(f.server, &bad),
        Err(RegistryError::MalformedRecord(_))
    ));
}

#[test]
fn batch_gas_is_base_plus_calldata_plus_logs() {
    let f = fixture();
    let records: Vec<_> = (0..10).map(record).collect();
    let receipt = f.registry.store_app_batch(f.server, &records).unwrap();
    assert_eq!(receipt.logs.len(), 10);

    let s = GasSchedule::ETHEREUM;
    let o = ExecutionOverhead::default();
    let encoded: Vec<_> = records.iter().map(|r| r.encode().unwrap()).collect();
    let calldata = calldata::store_app_batch(&encoded);
    let per_log: u64 = encoded
        .iter()
        .map(|e| o.upload_record + s.log_cost(2, e.len()))
        .sum();
    let expected = s.intrinsic_cost(&calldata) + s.sload + o.upload_call + per_log;
    assert_eq!(receipt.gas_used, expected);
}

#[test]
fn batch_of_one_equals_single_upload() {
    let f = fixture();
    let r = record(3);
    let single = f.registry.store_app(f.server, &r).unwrap().gas_used;
    let batch = f.registry.store_app_batch(f.server, &[r]).unwrap().gas_used;
    // the batch carries a 2-byte count prefix in calldata: one zero and one non-zero byte
    assert_eq!(batch, single + 4 + 16);
}

#[test]
fn batch_bounds() {
    let f = fixture();
    assert!(matches!(
        f.registry.store_app_batch(f.server, &[]),
        Err(RegistryError::EmptyBatch)
    ));
    let too_many: Vec<_> = (0..=MAX_BATCH as u32).map(record).collect();
    assert!(matches!(
        f.registry.store_app_batch(f.server, &too_many),
        Err(RegistryError::BatchTooLarge)
    ));
    assert!(matches!(
        f.registry.store_app_batch(f.stranger, &[record(1)]),
        Err(RegistryError::NotWhitelisted)
    ));
}

#[test]
fn estimate_matches_actual_and_is_free() {
    let f = fixture();
    let r = record(7);
    let before = f.registry.ledger().snapshot();
    let e1 = f.registry.store_app_estimate(f.stranger, &r).unwrap();
    let e2 = f.registry.store_app_estimate(f.stranger, &r).unwrap();
    assert_eq!(e1, e2);
    assert_eq!(f.registry.ledger().snapshot(), before);
    let actual = f.registry.store_app(f.server, &r).unwrap().gas_used;
    assert_eq!(e1, actual);
}

#[test]
fn estimate_rejects_malformed() {
    let f = fixture();
    let mut r = record(1);
    r.package_name.clear();
    assert!(matches!(
        f.registry.store_app_estimate(f.stranger, &r),
        Err(RegistryError::MalformedRecord(_))
    ));
}

#[test]
fn donations() {
    let f = fixture();
    let before = f.registry.balance();
    let receipt = f.registry.donate(f.stranger, 100_000).unwrap();
    assert_eq!(f.registry.balance(), before + 100_000);
    let (_, tx, stored) = f.registry.ledger().transaction(&receipt.tx_id).unwrap();
    assert_eq!(tx.value, 100_000);
    assert_eq!(tx.from, f.stranger);
    assert_eq!(stored.status, TxStatus::Success);
    assert!(matches!(
        f.registry.donate(f.stranger, 0),
        Err(RegistryError::ZeroValue)
    ));
}

#[test]
fn value_on_non_payable_function_reverts() {
    let f = fixture();
    let ledger = f.registry.ledger();
    let tx = crate::ledger::Transaction::new(f.server, f.registry.address(), ledger.nonce(&f.server))
        .with_value(5)
        .with_calldata(calldata::store_app(&record(1).encode().unwrap()));
    assert!(ledger.submit(tx).is_err());
}

#[test]
fn whitelist_management() {
    let f = fixture();
    let a = Address::from_label("new-server");
    f.registry.whitelist_add(f.owner, a).unwrap();
    f.registry.whitelist_add(f.owner, a).unwrap();
    assert!(f.registry.is_whitelisted(&a));
    // `a` has no funds yet; give it some so it can pay gas
    f.registry
        .ledger()
        .submit(
            crate::ledger::Transaction::new(f.owner, a, f.registry.ledger().nonce(&f.owner))
                .with_value(10u128.pow(18)),
        )
        .unwrap();
    f.registry.store_app(a, &record(1)).unwrap();

    f.registry.whitelist_remove(f.owner, a).unwrap();
    f.registry.whitelist_remove(f.owner, a).unwrap();
    assert!(!f.registry.is_whitelisted(&a));
    assert!(matches!(
        f.registry.store_app(a, &record(2)),
        Err(RegistryError::NotWhitelisted)
    ));

    assert!(matches!(
        f.registry.whitelist_add(f.server, f.stranger),
        Err(RegistryError::NotOwner)
    ));
    assert!(matches!(
        f.registry.whitelist_remove(f.stranger, f.server),
        Err(RegistryError::NotOwner)
    ));
}

#[test]
fn owner_is_not_implicitly_whitelisted() {
    let f = fixture();
    assert!(matches!(
        f.registry.store_app(f.owner, &record(1)),
        Err(RegistryError::NotWhitelisted)
    ));
}

#[test]
fn baseline_writes_words_and_rejects_duplicates() {
    let f = fixture();
    let r = record(1);
    let encoded = r.encode().unwrap();
    let words = encoded.len().div_ceil(32) as u64;
    let receipt = f.registry.store_app_baseline(f.server, &r).unwrap();
    assert!(receipt.logs.is_empty());

    let s = GasSchedule::ETHEREUM;
    let o = ExecutionOverhead::default();
    let calldata = calldata::store_app_baseline(&encoded);
    // whitelist read + count read, one fresh word per 32 bytes, fresh count word
    let expected = s.intrinsic_cost(&calldata)
        + 2 * s.sload
        + o.upload_call
        + o.upload_record
        + (words + 1) * s.sstore_set;
    assert_eq!(receipt.gas_used, expected);

    let log_gas = expected_store_gas(&r);
    assert!(receipt.gas_used > log_gas);

    assert!(matches!(
        f.registry.store_app_baseline(f.server, &r),
        Err(RegistryError::DuplicateRecord)
    ));

    // second distinct record pays for scanning the first one word by word
    let r2 = record(2);
    let enc2 = r2.encode().unwrap();
    let receipt2 = f.registry.store_app_baseline(f.server, &r2).unwrap();
    let expected2 = s.intrinsic_cost(&calldata::store_app_baseline(&enc2))
        + 2 * s.sload
        + words * s.sload
        + o.upload_call
        + o.upload_record
        + enc2.len().div_ceil(32) as u64 * s.sstore_set
        + s.sstore_reset;
    assert_eq!(receipt2.gas_used, expected2);
}

#[test]
fn access_control_is_complete() {
    let f = fixture();
    let r = record(9);
    let checks: Vec<(&str, Result<_, RegistryError>)> = vec![
        ("storeApp", f.registry.store_app(f.stranger, &r).map(|_| ())),
        ("storeAppBatch", f.registry.store_app_batch(f.stranger, std::slice::from_ref(&r)).map(|_| ())),
        ("storeAppBaseline", f.registry.store_app_baseline(f.stranger, &r).map(|_| ())),
        ("whitelistAdd", f.registry.whitelist_add(f.stranger, f.stranger).map(|_| ())),
        ("whitelistRemove", f.registry.whitelist_remove(f.server, f.server).map(|_| ())),
    ];
    for (name, result) in checks {
        assert!(
            matches!(result, Err(RegistryError::NotWhitelisted | RegistryError::NotOwner)),
            "{name} accepted an unauthorized caller"
        );
    }
    assert!(f.registry.is_whitelisted(&f.server));
    assert!(f.registry.records().unwrap().is_empty());
}

#[test]
fn reads_are_gas_free() {
    let f = fixture();
    for n in 0..5 {
        f.registry.store_app(f.server, &record(n)).unwrap();
    }
    let before = f.registry.ledger().snapshot();
    for n in 0..5 {
        f.registry.store_app_estimate(f.stranger, &record(n)).unwrap();
        assert_eq!(f.registry.find(&format!("com.example.app{n}"), "1.0.3").unwrap().len(), 1);
    }
    assert_eq!(f.registry.records().unwrap().len(), 5);
    assert_eq!(f.registry.ledger().snapshot(), before);
}

#[test]
fn selectors_are_distinct() {
    let mut sels: Vec<_> = Function::ALL.iter().map(|f| f.selector()).collect();
    sels.sort();
    sels.dedup();
    assert_eq!(sels.len(), Function::ALL.len());
}
