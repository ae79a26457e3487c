//! Paying for an upload with a donation to the registry contract.

use appgate::gateway::{AllocationConfig, Config, Gateway, GatewayError, MarketEnv, UploadRequest};
use appgate::hash::Address;
use appgate::ledger::Transaction;
use appgate::market::fixtures::FixtureCorpus;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut config = Config::default();
    config.fees.enabled = true;
    config.ledger.allocations.push(AllocationConfig {
        account: "alice".into(),
        balance_wei: 10u128.pow(18),
    });
    let corpus = FixtureCorpus::standard();
    let gateway = Gateway::open(&config, MarketEnv::from_corpus(&corpus))?;
    let alice = Address::from_label("alice");

    let req = UploadRequest::new(&corpus.app("script-md5").unwrap().page_url);
    let estimate = gateway.estimate_fee(&req)?;
    println!("estimate: {} gas at {} wei = {} wei", estimate.gas, estimate.gas_price, estimate.fee);

    let try_with = |tx| match gateway.upload(&req.clone().with_fee(tx)) {
        Ok(r) => println!("  accepted: {} stored, {} gas used", r.package_name, r.gas_used),
        Err(GatewayError::FeeRejected(why)) => println!("  rejected ({}): {why}", why.condition()),
        Err(other) => println!("  failed: {other}"),
    };

    println!("payment to the wrong account:");
    let nonce = gateway.ledger().nonce(&alice);
    let stray = Transaction::new(alice, Address::from_label("mallory"), nonce).with_value(estimate.fee);
    try_with(gateway.ledger().submit(stray)?.tx_id);

    println!("underpayment:");
    try_with(gateway.registry().donate(alice, estimate.fee / 2)?.tx_id);

    println!("proper donation:");
    let paid = gateway.registry().donate(alice, estimate.fee)?.tx_id;
    try_with(paid);

    println!("same donation again, for another app:");
    let other = UploadRequest::new(&corpus.app("path-md5").unwrap().page_url).with_fee(paid);
    if let Err(e) = gateway.upload(&other) {
        println!("  {e}");
    }
    println!("registry balance: {} wei", gateway.registry().balance());
    Ok(())
}
