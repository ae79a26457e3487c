use std::fmt::Write as _;
use std::time::{Duration, Instant};

use serde::Serialize;

/// Wall-clock time spent in each upload phase.
///
/// `chain_submit` covers the duplicate lookup and the registry transaction;
/// it is reported but left out of the overhead ratio because the upload
/// result does not wait on it.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct PhaseTimings {
    pub retrieve: Duration,
    pub checksum: Duration,
    pub repackaging: Duration,
    pub store_upload: Duration,
    pub chain_submit: Duration,
    pub total: Duration,
}

impl PhaseTimings {
    pub fn phase_sum(&self) -> Duration {
        self.retrieve + self.checksum + self.repackaging + self.store_upload + self.chain_submit
    }

    /// Added work relative to the plain download.
    pub fn overhead(&self) -> f64 {
        let added = self.checksum + self.repackaging + self.store_upload;
        added.as_secs_f64() / self.retrieve.as_secs_f64().max(f64::MIN_POSITIVE)
    }

    fn rows(&self) -> [(&'static str, Duration); 5] {
        [
            ("retrieve", self.retrieve),
            ("checksum", self.checksum),
            ("repackaging", self.repackaging),
            ("storeUpload", self.store_upload),
            ("chainSubmit", self.chain_submit),
        ]
    }
}

/// Measures consecutive phases with one running clock.
pub(crate) struct PhaseClock {
    started: Instant,
    mark: Instant,
    pub timings: PhaseTimings,
}

impl PhaseClock {
    pub fn start() -> Self {
        let now = Instant::now();
        PhaseClock {
            started: now,
            mark: now,
            timings: PhaseTimings::default(),
        }
    }

    /// Time since the previous lap.
    pub fn lap(&mut self) -> Duration {
        let now = Instant::now();
        let elapsed = now - self.mark;
        self.mark = now;
        elapsed
    }

    pub fn finish(mut self) -> PhaseTimings {
        self.timings.total = self.started.elapsed();
        self.timings
    }
}

/// Means over a set of uploads.
#[derive(Debug, Clone, Serialize)]
pub struct TimingReport {
    pub runs: usize,
    pub mean: PhaseTimings,
    /// (checksum + repackaging + storeUpload) / retrieve, in percent.
    pub overhead_percent: f64,
    /// Largest |phase sum - total| / total over all runs.
    pub max_sum_deviation: f64,
}

fn mean(values: impl Iterator<Item = Duration>, n: usize) -> Duration {
    values.sum::<Duration>() / n as u32
}

pub fn timing_report(runs: &[PhaseTimings]) -> Option<TimingReport> {
    let n = runs.len();
    if n == 0 {
        return None;
    }
    let mean = PhaseTimings {
        retrieve: mean(runs.iter().map(|r| r.retrieve), n),
        checksum: mean(runs.iter().map(|r| r.checksum), n),
        repackaging: mean(runs.iter().map(|r| r.repackaging), n),
        store_upload: mean(runs.iter().map(|r| r.store_upload), n),
        chain_submit: mean(runs.iter().map(|r| r.chain_submit), n),
        total: mean(runs.iter().map(|r| r.total), n),
    };
    let max_sum_deviation = runs
        .iter()
        .map(|r| {
            let (sum, total) = (r.phase_sum().as_secs_f64(), r.total.as_secs_f64());
            (sum - total).abs() / total.max(f64::MIN_POSITIVE)
        })
        .fold(0.0, f64::max);
    Some(TimingReport {
        runs: n,
        overhead_percent: mean.overhead() * 100.0,
        mean,
        max_sum_deviation,
    })
}

impl TimingReport {
    /// Tab-separated: phase, mean milliseconds, share of total.
    pub fn to_table(&self) -> String {
        let total = self.mean.total.as_secs_f64();
        let mut out = String::from("phase\tmean_ms\tshare\n");
        for (name, d) in self.mean.rows() {
            let _ = writeln!(out, "{name}\t{:.3}\t{:.4}", d.as_secs_f64() * 1e3, d.as_secs_f64() / total);
        }
        let _ = writeln!(out, "total\t{:.3}\t1.0000", total * 1e3);
        let _ = writeln!(out, "overhead_percent\t{:.2}\t", self.overhead_percent);
        out
    }
}
