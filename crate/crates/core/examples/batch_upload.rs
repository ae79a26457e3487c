//! How much a batched upload saves over one transaction per record.

use appgate::bench::batch_amortization;
use appgate::testkit::random_records;
use rand::SeedableRng;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut rng = rand::rngs::StdRng::seed_from_u64(7);
    let records = random_records(&mut rng, 100);
    println!("{:>5} {:>12} {:>12} {:>6}", "size", "singles", "batch", "ratio");
    for p in batch_amortization(&records, &[1, 10, 25, 50, 100])? {
        println!("{:>5} {:>12} {:>12} {:>6.2}", p.size, p.singles_gas, p.batch_gas, p.ratio);
    }
    Ok(())
}
