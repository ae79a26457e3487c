//! Picking the fastest public gateway from measured round-trip times.

use appgate::castore::{probe_all, public_gateway_probe, public_gateways, select_gateway};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut gateways = public_gateways();
    probe_all(&mut gateways, &public_gateway_probe());
    gateways.sort_by(|a, b| a.last_rtt.total_cmp(&b.last_rtt));
    for g in &gateways {
        println!("{:<28} {:>6.2} s", g.name, g.last_rtt);
    }
    let best = select_gateway(&gateways, &public_gateway_probe())?;
    println!("selected {} ({})", best.name, best.endpoint);
    Ok(())
}
