//! Upload every fixture app, replicate to the consortium, lose the server
//! and still download.

use std::time::Duration;

use appgate::gateway::{Config, Gateway, MarketEnv, UploadRequest};
use appgate::market::fixtures::FixtureCorpus;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let corpus = FixtureCorpus::standard();
    let gateway = Gateway::open(&Config::default(), MarketEnv::from_corpus(&corpus))?;

    for app in corpus.apps() {
        match gateway.upload(&UploadRequest::new(&app.page_url)) {
            Ok(r) => println!(
                "stored   {:<28} {:<20} repack {:<9} {}",
                r.package_name,
                r.verdict.channel.to_string(),
                r.repack_verdict.to_string(),
                r.content_id
            ),
            Err(e) => println!("refused  {:<28} {e}", app.package),
        }
    }

    for (pinner, report) in gateway.sync()? {
        println!("{pinner} pinned {} of {} indexed", report.newly_pinned.len(), report.indexed);
    }
    gateway.network().set_online(gateway.server_node(), false)?;
    gateway.advance(Duration::from_secs(24 * 3600));

    for stored in gateway.apps(0, 100)? {
        let r = &stored.record;
        let got = gateway.download(&r.package_name, &r.version)?;
        println!("download {:<28} {} bytes via {}", r.package_name, got.bytes.len(), got.served_by.name);
    }
    Ok(())
}
