use serde::{Deserialize, Serialize};

/// Per-operation gas prices charged by the ledger's meter.
///
/// `sstore_set` and `log_base` are the two costs the log-vs-storage argument
/// rests on. The remaining entries follow the public Ethereum schedule
/// (Istanbul calldata pricing, Berlin cold storage reads).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GasSchedule {
    pub tx_base: u64,
    pub calldata_nonzero_byte: u64,
    pub calldata_zero_byte: u64,
    /// Storage write turning a zero word non-zero.
    pub sstore_set: u64,
    /// Any other storage write.
    pub sstore_reset: u64,
    /// Storage read.
    pub sload: u64,
    pub log_base: u64,
    pub log_topic: u64,
    pub log_data_byte: u64,
}

impl GasSchedule {
    pub const ETHEREUM: GasSchedule = GasSchedule {
        tx_base: 21_000,
        calldata_nonzero_byte: 16,
        calldata_zero_byte: 4,
        sstore_set: 20_000,
        sstore_reset: 5_000,
        sload: 2_100,
        log_base: 375,
        log_topic: 375,
        log_data_byte: 8,
    };

    pub fn calldata_cost(&self, calldata: &[u8]) -> u64 {
        calldata
            .iter()
            .map(|b| {
                if *b == 0 {
                    self.calldata_zero_byte
                } else {
                    self.calldata_nonzero_byte
                }
            })
            .sum()
    }

    pub fn log_cost(&self, topics: usize, data_len: usize) -> u64 {
        self.log_base + self.log_topic * topics as u64 + self.log_data_byte * data_len as u64
    }

    /// Intrinsic cost of a transaction before any contract code runs.
    pub fn intrinsic_cost(&self, calldata: &[u8]) -> u64 {
        self.tx_base + self.calldata_cost(calldata)
    }

    /// How many times cheaper one log operation is than one fresh storage word.
    pub fn storage_to_log_ratio(&self) -> f64 {
        self.sstore_set as f64 / self.log_base as f64
    }

    pub fn validate(&self) -> bool {
        [
            self.tx_base,
            self.calldata_nonzero_byte,
            self.calldata_zero_byte,
            self.sstore_set,
            self.sstore_reset,
            self.sload,
            self.log_base,
            self.log_topic,
            self.log_data_byte,
        ]
        .iter()
        .all(|v| *v > 0)
    }
}

impl Default for GasSchedule {
    fn default() -> Self {
        Self::ETHEREUM
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn storage_vs_log_ratio() {
        let s = GasSchedule::ETHEREUM;
        assert_eq!(s.sstore_set, 20_000);
        assert_eq!(s.log_base, 375);
        assert!((s.storage_to_log_ratio() - 53.333_333).abs() < 1e-5);
        assert_eq!(s.sstore_set * 3, s.log_base * 160);
    }

    #[test]
    fn calldata_prices_zero_and_nonzero_bytes() {
        let s = GasSchedule::ETHEREUM;
        assert_eq!(s.calldata_cost(&[]), 0);
        assert_eq!(s.calldata_cost(&[0, 1, 0, 255]), 4 + 16 + 4 + 16);
        assert_eq!(s.intrinsic_cost(&[]), 21_000);
    }

    #[test]
    fn log_cost_arithmetic() {
        let s = GasSchedule::ETHEREUM;
        assert_eq!(s.log_cost(0, 0), 375);
        assert_eq!(s.log_cost(2, 10), 375 + 750 + 80);
        assert!(s.validate());
    }
}
