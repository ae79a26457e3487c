use std::collections::BTreeMap;

use super::gas::GasSchedule;
use super::types::{LogEntry, Wei};
use crate::hash::{Address, H256};

/// Reason a contract call aborted. All buffered effects are discarded.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("{reason}")]
pub struct Revert {
    pub reason: String,
}

impl Revert {
    pub fn new(reason: impl Into<String>) -> Self {
        Revert {
            reason: reason.into(),
        }
    }
}

/// Contract code hosted at an address on the ledger.
pub trait ContractExecutor: Send + Sync {
    fn execute(&self, ctx: &mut ExecutionContext<'_>) -> Result<(), Revert>;
}

/// Plain value transfer: no code runs, no gas beyond the intrinsic cost.
pub struct NoopExecutor;

impl ContractExecutor for NoopExecutor {
    fn execute(&self, _ctx: &mut ExecutionContext<'_>) -> Result<(), Revert> {
        Ok(())
    }
}

/// Read-only view of committed contract storage.
pub trait StorageView {
    fn storage_at(&self, contract: &Address, key: &H256) -> H256;
    fn balance_of(&self, account: &Address) -> Wei;
}

/// Metered sandbox handed to a [`ContractExecutor`].
///
/// Storage writes and logs are buffered; the ledger applies them only when
/// execution returns `Ok`.
pub struct ExecutionContext<'a> {
    pub caller: Address,
    pub contract: Address,
    pub value: Wei,
    pub calldata: &'a [u8],
    schedule: &'a GasSchedule,
    view: &'a dyn StorageView,
    writes: BTreeMap<H256, H256>,
    logs: Vec<LogEntry>,
    gas_used: u64,
    gas_limit: u64,
    push_logs: bool,
}

impl<'a> ExecutionContext<'a> {
    pub(crate) fn new(
        caller: Address,
        contract: Address,
        value: Wei,
        calldata: &'a [u8],
        schedule: &'a GasSchedule,
        view: &'a dyn StorageView,
        gas_limit: u64,
    ) -> Self {
        ExecutionContext {
            caller,
            contract,
            value,
            calldata,
            schedule,
            view,
            writes: BTreeMap::new(),
            logs: Vec::new(),
            gas_used: 0,
            gas_limit,
            push_logs: true,
        }
    }

    pub fn schedule(&self) -> &GasSchedule {
        self.schedule
    }

    /// Gas charged by contract code so far (excludes the intrinsic cost).
    pub fn gas_used(&self) -> u64 {
        self.gas_used
    }

    /// Logs are charged but not recorded; used by dry-run estimation.
    pub fn discard_logs(&mut self) {
        self.push_logs = false;
    }

    pub fn charge(&mut self, gas: u64) -> Result<(), Revert> {
        let next = self.gas_used.saturating_add(gas);
        if next > self.gas_limit {
            self.gas_used = self.gas_limit;
            return Err(Revert::new("out of gas"));
        }
        self.gas_used = next;
        Ok(())
    }

    pub fn sload(&mut self, key: &H256) -> Result<H256, Revert> {
        self.charge(self.schedule.sload)?;
        Ok(self.peek(key))
    }

    /// Unmetered read used to decide the write price.
    fn peek(&self, key: &H256) -> H256 {
        self.writes
            .get(key)
            .copied()
            .unwrap_or_else(|| self.view.storage_at(&self.contract, key))
    }

    pub fn sstore(&mut self, key: H256, value: H256) -> Result<(), Revert> {
        let current = self.peek(&key);
        let cost = if current.is_zero() && !value.is_zero() {
            self.schedule.sstore_set
        } else {
            self.schedule.sstore_reset
        };
        self.charge(cost)?;
        self.writes.insert(key, value);
        Ok(())
    }

    pub fn emit(&mut self, topics: Vec<H256>, data: Vec<u8>) -> Result<(), Revert> {
        if topics.len() > LogEntry::MAX_TOPICS {
            return Err(Revert::new("too many log topics"));
        }
        self.charge(self.schedule.log_cost(topics.len(), data.len()))?;
        if self.push_logs {
            self.logs.push(LogEntry {
                emitter: self.contract,
                topics,
                data,
            });
        }
        Ok(())
    }

    /// Balance of the executing contract, including the value attached to this call.
    pub fn self_balance(&self) -> Wei {
        self.view.balance_of(&self.contract) + self.value
    }

    pub(crate) fn finish(self) -> ExecutionEffects {
        ExecutionEffects {
            writes: self.writes,
            logs: self.logs,
            gas_used: self.gas_used,
        }
    }
}

pub(crate) struct ExecutionEffects {
    pub writes: BTreeMap<H256, H256>,
    pub logs: Vec<LogEntry>,
    pub gas_used: u64,
}
