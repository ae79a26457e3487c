//! What the gateway sees on each market, without storing anything.

use appgate::gateway::{Config, Gateway, MarketEnv};
use appgate::market::fixtures::FixtureCorpus;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let corpus = FixtureCorpus::standard();
    for m in &corpus.registry.markets {
        println!(
            "{:<14} secure={:<5} download={:?} checksum={:?}",
            m.id, m.transport_secure, m.download, m.checksum
        );
    }
    println!();
    let gateway = Gateway::open(&Config::default(), MarketEnv::from_corpus(&corpus))?;
    for app in corpus.apps() {
        let run = gateway.dry_run(&app.page_url)?;
        println!("{}", app.page_url);
        println!("  -> {}{}", run.download_url, if run.rewritten { " (rewritten)" } else { "" });
        println!("  {}: {}", run.verdict.channel, run.verdict.detail);
    }
    Ok(())
}
