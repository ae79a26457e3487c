//! Minimal account ledger with gas metering, receipts and per-block log blooms.

mod bloom;
mod chain;
mod exec;
mod gas;
mod store;
mod types;

pub use bloom::{bit_indices, Bloom2048, BLOOM_BITS, BLOOM_BYTES};
pub use chain::{Allocation, CallOutcome, Genesis, Ledger, LogFilter, LogQuery, StateSnapshot};
pub use exec::{ContractExecutor, ExecutionContext, NoopExecutor, Revert, StorageView};
pub use gas::GasSchedule;
pub use types::{
    Account, Block, LogEntry, Receipt, Transaction, TxStatus, Wei, DEFAULT_GAS_LIMIT,
};

#[derive(Debug, thiserror::Error)]
pub enum LedgerError {
    #[error("bad nonce: expected {expected}, got {got}")]
    BadNonce { expected: u64, got: u64 },
    #[error("insufficient balance: need {need} wei, have {have}")]
    InsufficientBalance { need: Wei, have: Wei },
    #[error("transaction reverted: {reason}")]
    Reverted { reason: String, receipt: Receipt },
    #[error("block range {from}..={to} outside chain head {head}")]
    RangeOutOfBounds { from: u64, to: u64, head: u64 },
    #[error("chain replay failed: {0}")]
    Replay(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl LedgerError {
    pub fn revert_reason(&self) -> Option<&str> {
        match self {
            LedgerError::Reverted { reason, .. } => Some(reason),
            _ => None,
        }
    }
}
