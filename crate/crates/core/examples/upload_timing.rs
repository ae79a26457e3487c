//! Where upload time goes, phase by phase, with simulated market latency.

use std::time::Duration;

use appgate::bench::upload_timing;
use appgate::gateway::{Config, Gateway, MarketEnv};
use appgate::market::fixtures::{FixtureCorpus, CHECKSUM_MARKETS};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut corpus = FixtureCorpus::new();
    let urls: Vec<String> = (0..20u32)
        .map(|i| {
            let market = CHECKSUM_MARKETS[i as usize % CHECKSUM_MARKETS.len()];
            corpus.publish(market, &format!("com.timing.app{i}"), "1.0", 0x100 + i).page_url
        })
        .collect();
    corpus.web.set_latency(Duration::from_millis(15));
    let gateway = Gateway::open(&Config::default(), MarketEnv::from_corpus(&corpus))?;
    let report = upload_timing(&gateway, &urls)?;
    print!("{}", report.to_table());
    println!("phase sums within {:.3}% of totals", report.max_sum_deviation * 100.0);
    Ok(())
}
