//! Finding upload logs through per-block bloom filters.

use appgate::bench::GasBench;
use appgate::ledger::LogFilter;
use appgate::registry::{event_topic, identity_topic};
use appgate::testkit::random_records;
use rand::{Rng, SeedableRng};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let bench = GasBench::default();
    let mut rng = rand::rngs::StdRng::seed_from_u64(3);
    let records = random_records(&mut rng, 300);
    for r in &records {
        // Interleave unrelated blocks so the filter has something to skip.
        if rng.gen_bool(0.5) {
            bench.registry.donate(bench.uploader, 1)?;
        }
        bench.single(r)?;
    }
    let ledger = bench.registry.ledger();
    let head = ledger.head();

    let all = ledger.find_logs_filtered(0, head, &LogFilter::topic(event_topic()))?;
    println!("blocks {}, upload logs {}", all.blocks_in_range, all.logs.len());

    let wanted = &records[records.len() / 2];
    let filter = LogFilter::topic(event_topic())
        .and_topic(identity_topic(&wanted.package_name, &wanted.version))
        .at(bench.registry.address());
    let q = ledger.find_logs_filtered(0, head, &filter)?;
    println!(
        "{} {}: {} log(s), {} of {} blocks matched the bloom, {} scanned",
        wanted.package_name,
        wanted.version,
        q.logs.len(),
        q.blocks_bloom_matched,
        q.blocks_in_range,
        q.blocks_scanned
    );
    let found = bench.registry.find(&wanted.package_name, &wanted.version)?;
    println!("decoded: {:?}", found.first().map(|s| &s.record.origin_url));
    Ok(())
}
