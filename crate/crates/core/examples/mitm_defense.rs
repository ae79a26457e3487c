//! A page declares one MD5 while an attacker on the plain-http path serves
//! different bytes. The upload is refused and nothing is stored.

use appgate::gateway::{Config, Gateway, GatewayError, MarketEnv, UploadRequest};
use appgate::market::fixtures::{FixtureCorpus, MITM_DECLARED_MD5, MITM_REPORTED_TAMPERED_MD5};
use appgate::market::verify_digest;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    // The digests as reported for the observed attack.
    let verdict = verify_digest(MITM_DECLARED_MD5, MITM_REPORTED_TAMPERED_MD5);
    println!("declared {MITM_DECLARED_MD5} vs received {MITM_REPORTED_TAMPERED_MD5}: {verdict}");

    let corpus = FixtureCorpus::standard();
    let gateway = Gateway::open(&Config::default(), MarketEnv::from_corpus(&corpus))?;
    let head = gateway.ledger().head();

    let app = corpus.mitm_app().expect("standard corpus has the case");
    match gateway.upload(&UploadRequest::new(&app.page_url)) {
        Err(GatewayError::SecurityRejected(v)) => println!("fixture upload refused: {v}"),
        other => return Err(format!("expected a rejection, got {other:?}").into()),
    }

    // Tamper with an honest download in transit.
    corpus.web.intercept_http(|url, body| {
        if url.path().ends_with(".apk") {
            let mid = body.len() / 2;
            body[mid] ^= 0x01;
        }
    });
    let honest = corpus.app("query-md5").unwrap();
    match gateway.upload(&UploadRequest::new(&honest.page_url)) {
        Err(GatewayError::SecurityRejected(v)) => println!("tampered download refused: {v}"),
        other => return Err(format!("expected a rejection, got {other:?}").into()),
    }
    println!(
        "chain head unchanged: {}, records stored: {}",
        gateway.ledger().head() == head,
        gateway.registry().records()?.len()
    );
    Ok(())
}
