use std::time::Duration;

use tracing::warn;

use super::network::{Network, SimTime};
use super::{CastoreError, ContentId};

/// Periodically re-requests content through gateways so their caches never
/// reach the collector.
#[derive(Debug, Clone)]
pub struct RefreshDaemon {
    pub cids: Vec<ContentId>,
    pub gateways: Vec<String>,
    pub period: Duration,
    next_due: Option<SimTime>,
}

#[derive(Debug, Default, Clone, PartialEq, Eq)]
pub struct RefreshReport {
    pub cycles: u32,
    pub fetched: u32,
    pub failures: Vec<(String, ContentId, String)>,
}

impl RefreshDaemon {
    pub const DEFAULT_PERIOD: Duration = Duration::from_secs(10 * 60);

    pub fn new(cids: Vec<ContentId>, gateways: Vec<String>, period: Duration) -> Self {
        RefreshDaemon {
            cids,
            gateways,
            period: period.max(Duration::from_millis(1)),
            next_due: None,
        }
    }

    /// The period must undercut the shortest gateway TTL for refresh to keep
    /// content alive.
    pub fn check_period(&self, network: &Network) -> Result<(), CastoreError> {
        let min_ttl = self
            .gateways
            .iter()
            .filter_map(|g| network.inspect(g, |n| n.ttl).ok())
            .min();
        match min_ttl {
            Some(ttl) if self.period >= ttl => Err(CastoreError::RefreshTooSlow {
                period: self.period,
                ttl,
            }),
            _ => Ok(()),
        }
    }

    pub fn track(&mut self, cid: ContentId) {
        if !self.cids.contains(&cid) {
            self.cids.push(cid);
        }
    }

    /// One pass: fetch every cid through every gateway. Failures are logged
    /// and collected; the pass always completes.
    pub fn run_cycle(&self, network: &Network) -> RefreshReport {
        let mut report = RefreshReport {
            cycles: 1,
            ..RefreshReport::default()
        };
        for gateway in &self.gateways {
            for cid in &self.cids {
                match network.fetch(cid, gateway) {
                    Ok(_) => report.fetched += 1,
                    Err(err) => {
                        warn!(%gateway, %cid, %err, "refresh fetch failed");
                        report.failures.push((gateway.clone(), *cid, err.to_string()));
                    }
                }
            }
        }
        report
    }

    /// Runs a cycle if one is due at the network's current time.
    pub fn poll(&mut self, network: &Network) -> Option<RefreshReport> {
        let now = network.now();
        let due = *self.next_due.get_or_insert(now);
        if now < due {
            return None;
        }
        self.next_due = Some(now + self.period.as_millis() as u64);
        Some(self.run_cycle(network))
    }

    /// Time of the next scheduled cycle, if one has been scheduled.
    pub fn next_due(&self) -> Option<SimTime> {
        self.next_due
    }
}

/// Advances the clock by `span`, stopping at every refresh deadline to run
/// the due daemons and collecting garbage on every node after each step.
pub fn advance_with_refresh(network: &Network, daemons: &mut [RefreshDaemon], span: Duration) -> RefreshReport {
    let end = network.now() + span.as_millis() as u64;
    let mut total = RefreshReport::default();
    loop {
        for d in daemons.iter_mut() {
            merge(&mut total, d.poll(network));
        }
        let next = daemons.iter().filter_map(|d| d.next_due()).min();
        match next {
            Some(t) if t <= end => {
                network.clock().set(t);
                network.gc_all();
            }
            _ => break,
        }
    }
    network.clock().set(end);
    network.gc_all();
    total
}

fn merge(total: &mut RefreshReport, part: Option<RefreshReport>) {
    if let Some(p) = part {
        total.cycles += p.cycles;
        total.fetched += p.fetched;
        total.failures.extend(p.failures);
    }
}
