//! Gas and timing measurements over a fresh in-memory ledger.

use std::sync::Arc;

use serde::Serialize;

use crate::gateway::{timing_report, Gateway, GatewayError, TimingReport, UploadRequest};
use crate::hash::Address;
use crate::ledger::{GasSchedule, Genesis, Ledger};
use crate::registry::{AppRecord, ExecutionOverhead, Registry, RegistryError, MAX_BATCH};

/// Registry with a whitelisted, well-funded uploader.
pub struct GasBench {
    pub registry: Registry,
    pub uploader: Address,
}

impl GasBench {
    pub fn new(overhead: ExecutionOverhead) -> Self {
        let owner = Address::from_label("bench-owner");
        let uploader = Address::from_label("bench-uploader");
        let genesis = Genesis::new(Genesis::ONE_GWEI)
            .fund(owner, 10u128.pow(24))
            .fund(uploader, 10u128.pow(24));
        let registry = Registry::deploy(
            Arc::new(Ledger::new(&genesis)),
            Address::from_label("bench-registry"),
            owner,
            overhead,
        );
        registry.whitelist_add(owner, uploader).expect("owner may whitelist");
        GasBench { registry, uploader }
    }

    pub fn single(&self, record: &AppRecord) -> Result<u64, RegistryError> {
        Ok(self.registry.store_app(self.uploader, record)?.gas_used)
    }

    pub fn batch(&self, records: &[AppRecord]) -> Result<u64, RegistryError> {
        Ok(self.registry.store_app_batch(self.uploader, records)?.gas_used)
    }

    pub fn baseline(&self, record: &AppRecord) -> Result<u64, RegistryError> {
        Ok(self.registry.store_app_baseline(self.uploader, record)?.gas_used)
    }
}

impl Default for GasBench {
    fn default() -> Self {
        GasBench::new(ExecutionOverhead::default())
    }
}

/// Cost of the storage primitive each design rests on.
pub fn mechanism_ratio(schedule: &GasSchedule) -> f64 {
    schedule.sstore_set as f64 / schedule.log_base as f64
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StorageComparison {
    pub records: usize,
    pub mean_log_gas: f64,
    pub mean_baseline_gas: f64,
    /// Mean over records of baseline gas / log gas.
    pub mean_ratio: f64,
}

/// Stores each record once through the log path and once through the
/// storage-word baseline.
pub fn compare_storage(records: &[AppRecord]) -> Result<StorageComparison, RegistryError> {
    let bench = GasBench::default();
    let (mut log_sum, mut base_sum, mut ratio_sum) = (0u64, 0u64, 0f64);
    for r in records {
        let log = bench.single(r)?;
        let base = bench.baseline(r)?;
        log_sum += log;
        base_sum += base;
        ratio_sum += base as f64 / log as f64;
    }
    let n = records.len().max(1) as f64;
    Ok(StorageComparison {
        records: records.len(),
        mean_log_gas: log_sum as f64 / n,
        mean_baseline_gas: base_sum as f64 / n,
        mean_ratio: ratio_sum / n,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BatchPoint {
    pub size: usize,
    pub singles_gas: u64,
    pub batch_gas: u64,
    /// `singles_gas / batch_gas`.
    pub ratio: f64,
}

/// For each size, the first `size` records uploaded one by one versus in
/// one batch.
pub fn batch_amortization(records: &[AppRecord], sizes: &[usize]) -> Result<Vec<BatchPoint>, RegistryError> {
    sizes
        .iter()
        .map(|&size| {
            assert!(size <= records.len() && size <= MAX_BATCH, "batch size {size} out of range");
            let chunk = &records[..size];
            let singles = GasBench::default();
            let singles_gas = chunk.iter().map(|r| singles.single(r)).sum::<Result<u64, _>>()?;
            let batch_gas = GasBench::default().batch(chunk)?;
            Ok(BatchPoint {
                size,
                singles_gas,
                batch_gas,
                ratio: singles_gas as f64 / batch_gas as f64,
            })
        })
        .collect()
}

/// Runs every upload in `page_urls` through the gateway and summarizes the
/// phase timings of those that succeed.
pub fn upload_timing(gateway: &Gateway, page_urls: &[String]) -> Result<TimingReport, GatewayError> {
    let mut runs = Vec::with_capacity(page_urls.len());
    for url in page_urls {
        let (_, t) = gateway.upload_timed(&UploadRequest::new(url.as_str()))?;
        runs.push(t);
    }
    timing_report(&runs).ok_or_else(|| GatewayError::InvalidRequest("no uploads to time".into()))
}
