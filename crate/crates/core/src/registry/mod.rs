//! App registry contract: whitelist-gated metadata storage in transaction logs.
//!
//! [`RegistryContract`] is the code the ledger executes; [`Registry`] is the
//! off-chain handle that builds transactions and decodes logs.

mod contract;
mod record;

use std::sync::Arc;

use parking_lot::Mutex;

pub use contract::{
    baseline_count_slot, baseline_word_slot, calldata, event_topic, identity_topic,
    whitelist_slot, ExecutionOverhead, Function, RegistryContract, APP_STORED_EVENT, MAX_BATCH,
};
pub use record::{serial_bytes, AppRecord, RecordError, RepackVerdict};
pub use record::serial_hex;

use crate::hash::Address;
use crate::ledger::{Ledger, LedgerError, LogFilter, LogQuery, Receipt, Transaction, Wei};
use contract::reasons;

#[derive(Debug, thiserror::Error)]
pub enum RegistryError {
    #[error("caller is not whitelisted")]
    NotWhitelisted,
    #[error("caller is not the registry owner")]
    NotOwner,
    #[error("malformed record: {0}")]
    MalformedRecord(String),
    #[error("batch is empty")]
    EmptyBatch,
    #[error("batch exceeds {MAX_BATCH} records")]
    BatchTooLarge,
    #[error("record with this package and version already stored")]
    DuplicateRecord,
    #[error("donation must carry a non-zero value")]
    ZeroValue,
    #[error("contract reverted: {0}")]
    Reverted(String),
    #[error(transparent)]
    Ledger(LedgerError),
}

impl From<LedgerError> for RegistryError {
    fn from(err: LedgerError) -> Self {
        match err.revert_reason() {
            Some(reason) => RegistryError::from_revert(reason),
            None => RegistryError::Ledger(err),
        }
    }
}

impl RegistryError {
    fn from_revert(reason: &str) -> Self {
        match reason {
            reasons::NOT_WHITELISTED => RegistryError::NotWhitelisted,
            reasons::NOT_OWNER => RegistryError::NotOwner,
            reasons::MALFORMED_RECORD => RegistryError::MalformedRecord("rejected by contract".into()),
            reasons::EMPTY_BATCH => RegistryError::EmptyBatch,
            reasons::BATCH_TOO_LARGE => RegistryError::BatchTooLarge,
            reasons::DUPLICATE_RECORD => RegistryError::DuplicateRecord,
            reasons::ZERO_VALUE => RegistryError::ZeroValue,
            other => RegistryError::Reverted(other.to_string()),
        }
    }
}

impl From<RecordError> for RegistryError {
    fn from(err: RecordError) -> Self {
        RegistryError::MalformedRecord(err.to_string())
    }
}

/// A decoded upload log.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StoredApp {
    pub block: u64,
    pub record: AppRecord,
}

/// Client handle for a deployed registry.
#[derive(Clone)]
pub struct Registry {
    ledger: Arc<Ledger>,
    address: Address,
    submit_lock: Arc<Mutex<()>>,
}

impl Registry {
    /// Deploys the contract code at `address` with an immutable `owner`.
    pub fn deploy(
        ledger: Arc<Ledger>,
        address: Address,
        owner: Address,
        overhead: ExecutionOverhead,
    ) -> Self {
        ledger.deploy(address, Arc::new(RegistryContract::new(owner, overhead)));
        Registry::attach(ledger, address)
    }

    pub fn attach(ledger: Arc<Ledger>, address: Address) -> Self {
        Registry {
            ledger,
            address,
            submit_lock: Arc::new(Mutex::new(())),
        }
    }

    pub fn address(&self) -> Address {
        self.address
    }

    pub fn ledger(&self) -> &Arc<Ledger> {
        &self.ledger
    }

    fn send(&self, from: Address, value: Wei, calldata: Vec<u8>) -> Result<Receipt, RegistryError> {
        let _guard = self.submit_lock.lock();
        let tx = Transaction::new(from, self.address, self.ledger.nonce(&from))
            .with_value(value)
            .with_calldata(calldata);
        Ok(self.ledger.submit(tx)?)
    }

    /// Stores one record as a single log. No storage word is written.
    pub fn store_app(&self, caller: Address, record: &AppRecord) -> Result<Receipt, RegistryError> {
        let encoded = record.encode()?;
        self.send(caller, 0, calldata::store_app(&encoded))
    }

    /// Stores up to [`MAX_BATCH`] records in one transaction, one log each.
    pub fn store_app_batch(
        &self,
        caller: Address,
        records: &[AppRecord],
    ) -> Result<Receipt, RegistryError> {
        if records.is_empty() {
            return Err(RegistryError::EmptyBatch);
        }
        if records.len() > MAX_BATCH {
            return Err(RegistryError::BatchTooLarge);
        }
        let encoded = records
            .iter()
            .map(AppRecord::encode)
            .collect::<Result<Vec<_>, _>>()?;
        self.send(caller, 0, calldata::store_app_batch(&encoded))
    }

    /// Exact gas a successful `store_app` of `record` would use. Any address
    /// may ask; nothing is charged or recorded.
    pub fn store_app_estimate(&self, from: Address, record: &AppRecord) -> Result<u64, RegistryError> {
        let encoded = record.encode()?;
        let outcome = self.ledger.call_with(
            from,
            self.address,
            0,
            &calldata::store_app_estimate(&encoded),
            &calldata::store_app(&encoded),
        );
        match outcome.revert {
            Some(reason) => Err(RegistryError::from_revert(&reason)),
            None => Ok(outcome.gas_used),
        }
    }

    /// Comparison path: writes the record into storage words after a linear
    /// duplicate scan over everything stored so far.
    pub fn store_app_baseline(
        &self,
        caller: Address,
        record: &AppRecord,
    ) -> Result<Receipt, RegistryError> {
        let encoded = record.encode()?;
        self.send(caller, 0, calldata::store_app_baseline(&encoded))
    }

    pub fn donate(&self, from: Address, value: Wei) -> Result<Receipt, RegistryError> {
        self.send(from, value, calldata::donate())
    }

    pub fn whitelist_add(&self, caller: Address, member: Address) -> Result<Receipt, RegistryError> {
        self.send(caller, 0, calldata::whitelist_add(&member))
    }

    pub fn whitelist_remove(&self, caller: Address, member: Address) -> Result<Receipt, RegistryError> {
        self.send(caller, 0, calldata::whitelist_remove(&member))
    }

    pub fn is_whitelisted(&self, member: &Address) -> bool {
        !self
            .ledger
            .storage_at(&self.address, &whitelist_slot(member))
            .is_zero()
    }

    pub fn balance(&self) -> Wei {
        self.ledger.balance(&self.address)
    }

    fn query(&self, filter: &LogFilter) -> Result<LogQuery, RegistryError> {
        let head = self.ledger.head();
        Ok(self.ledger.find_logs_filtered(0, head, filter)?)
    }

    fn decode_logs(query: LogQuery) -> Vec<StoredApp> {
        query
            .logs
            .into_iter()
            .filter_map(|(block, log)| {
                AppRecord::decode(&log.data)
                    .ok()
                    .map(|record| StoredApp { block, record })
            })
            .collect()
    }

    /// Every record ever logged by this registry, in chain order.
    pub fn records(&self) -> Result<Vec<StoredApp>, RegistryError> {
        let filter = LogFilter::topic(event_topic()).at(self.address);
        Ok(Self::decode_logs(self.query(&filter)?))
    }

    /// Records logged for one (package, version), located through the
    /// per-block blooms. Consumes no gas.
    pub fn find(&self, package_name: &str, version: &str) -> Result<Vec<StoredApp>, RegistryError> {
        let filter = LogFilter::topic(event_topic())
            .and_topic(identity_topic(package_name, version))
            .at(self.address);
        let apps = Self::decode_logs(self.query(&filter)?);
        Ok(apps
            .into_iter()
            .filter(|a| a.record.package_name == package_name && a.record.version == version)
            .collect())
    }

    pub fn contains(&self, package_name: &str, version: &str) -> Result<bool, RegistryError> {
        Ok(!self.find(package_name, version)?.is_empty())
    }
}

#[cfg(test)]
mod tests;
