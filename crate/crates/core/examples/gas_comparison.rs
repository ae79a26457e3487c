//! Log-based storage versus one storage word per 32 bytes.
//!
//! ```text
//! cargo run --example gas_comparison -- [records] [seed]
//! ```

use appgate::bench::{compare_storage, mechanism_ratio, GasBench};
use appgate::ledger::GasSchedule;
use appgate::testkit::{random_records, typical_record};
use rand::SeedableRng;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1);
    let n: usize = args.next().map(|a| a.parse()).transpose()?.unwrap_or(140);
    let seed: u64 = args.next().map(|a| a.parse()).transpose()?.unwrap_or(1);

    let s = GasSchedule::ETHEREUM;
    println!("SSTORE (new slot) {} gas, LOG base {} gas: {:.2}x", s.sstore_set, s.log_base, mechanism_ratio(&s));

    let mut rng = rand::rngs::StdRng::seed_from_u64(seed);
    let records = random_records(&mut rng, n);
    let cmp = compare_storage(&records)?;
    println!("{} random records", cmp.records);
    println!("  log path       {:>10.0} gas", cmp.mean_log_gas);
    println!("  storage words  {:>10.0} gas", cmp.mean_baseline_gas);
    println!("  mean ratio     {:>10.2}", cmp.mean_ratio);

    let record = typical_record();
    let bench = GasBench::default();
    let (log, words) = (bench.single(&record)?, bench.baseline(&record)?);
    println!("{} {}: {log} vs {words} gas", record.package_name, record.version);
    Ok(())
}
