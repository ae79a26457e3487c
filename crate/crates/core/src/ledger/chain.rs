use std::collections::{BTreeMap, HashMap};
use std::path::Path;
use std::sync::Arc;

use parking_lot::{Mutex, RwLock};
use serde::{Deserialize, Serialize};

use super::bloom::Bloom2048;
use super::exec::{ContractExecutor, ExecutionContext, NoopExecutor, StorageView};
use super::gas::GasSchedule;
use super::store::BlockLog;
use super::types::{Account, Block, LogEntry, Receipt, Transaction, TxStatus, Wei};
use super::LedgerError;
use crate::hash::{Address, H256};

/// Initial ledger configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Genesis {
    #[serde(default)]
    pub schedule: GasSchedule,
    /// Wei charged per unit of gas.
    pub gas_price: Wei,
    #[serde(default)]
    pub allocations: Vec<Allocation>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Allocation {
    pub address: Address,
    pub balance: Wei,
}

impl Genesis {
    pub const ONE_GWEI: Wei = 1_000_000_000;

    pub fn new(gas_price: Wei) -> Self {
        Genesis {
            schedule: GasSchedule::ETHEREUM,
            gas_price,
            allocations: Vec::new(),
        }
    }

    pub fn fund(mut self, address: Address, balance: Wei) -> Self {
        self.allocations.push(Allocation { address, balance });
        self
    }
}

/// Result of executing contract code without committing it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CallOutcome {
    pub gas_used: u64,
    pub logs: Vec<LogEntry>,
    pub revert: Option<String>,
}

/// Filter applied by [`Ledger::find_logs_filtered`].
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct LogFilter {
    pub address: Option<Address>,
    /// Every listed topic must appear among the log's topics.
    pub topics: Vec<H256>,
}

impl LogFilter {
    pub fn topic(topic: H256) -> Self {
        LogFilter {
            address: None,
            topics: vec![topic],
        }
    }

    pub fn at(mut self, address: Address) -> Self {
        self.address = Some(address);
        self
    }

    pub fn and_topic(mut self, topic: H256) -> Self {
        self.topics.push(topic);
        self
    }

    fn bloom_admits(&self, bloom: &Bloom2048) -> bool {
        self.address.is_none_or(|a| bloom.contains(&a.0))
            && self.topics.iter().all(|t| bloom.contains(&t.0))
    }

    fn matches(&self, log: &LogEntry) -> bool {
        self.address.is_none_or(|a| log.emitter == a)
            && self.topics.iter().all(|t| log.has_topic(t))
    }
}

/// Matches plus instrumentation counters from a log query.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct LogQuery {
    pub logs: Vec<(u64, LogEntry)>,
    pub blocks_in_range: u64,
    pub blocks_bloom_matched: u64,
    pub blocks_scanned: u64,
}

/// Everything a read-only operation must leave untouched.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StateSnapshot {
    pub accounts: BTreeMap<Address, Account>,
    pub storage: BTreeMap<(Address, H256), H256>,
    pub head: u64,
}

#[derive(Default)]
struct WorldState {
    accounts: HashMap<Address, Account>,
    storage: HashMap<(Address, H256), H256>,
    blocks: Vec<Block>,
    tx_index: HashMap<H256, u64>,
}

impl StorageView for WorldState {
    fn storage_at(&self, contract: &Address, key: &H256) -> H256 {
        self.storage
            .get(&(*contract, *key))
            .copied()
            .unwrap_or_default()
    }

    fn balance_of(&self, account: &Address) -> Wei {
        self.accounts.get(account).map_or(0, |a| a.balance)
    }
}

/// Account-based ledger, one transaction per block.
///
/// All writes go through [`Ledger::submit`], serialized by an internal lock.
/// Reads take a shared lock and only ever observe fully appended blocks.
pub struct Ledger {
    schedule: GasSchedule,
    gas_price: Wei,
    state: RwLock<WorldState>,
    contracts: RwLock<HashMap<Address, Arc<dyn ContractExecutor>>>,
    store: Mutex<Option<BlockLog>>,
}

impl Ledger {
    pub fn new(genesis: &Genesis) -> Self {
        let mut state = WorldState::default();
        for alloc in &genesis.allocations {
            state.accounts.entry(alloc.address).or_default().balance += alloc.balance;
        }
        state.blocks.push(Block::genesis());
        Ledger {
            schedule: genesis.schedule,
            gas_price: genesis.gas_price,
            state: RwLock::new(state),
            contracts: RwLock::new(HashMap::new()),
            store: Mutex::new(None),
        }
    }

    /// Opens (or creates) an append-only block file, replaying every stored
    /// block through the deployed contracts. Each replayed receipt must match
    /// the stored one exactly.
    pub fn open(
        path: impl AsRef<Path>,
        genesis: &Genesis,
        contracts: Vec<(Address, Arc<dyn ContractExecutor>)>,
    ) -> Result<Self, LedgerError> {
        let ledger = Ledger::new(genesis);
        for (address, code) in contracts {
            ledger.deploy(address, code);
        }
        let (log, blocks) = BlockLog::open(path.as_ref())?;
        for stored in blocks {
            let expected_number = ledger.head() + 1;
            if stored.number != expected_number {
                return Err(LedgerError::Replay(format!(
                    "expected block {expected_number}, found {}",
                    stored.number
                )));
            }
            for (tx, receipt) in stored.transactions.iter().zip(&stored.receipts) {
                let replayed = ledger.apply(tx.clone(), false)?;
                if &replayed != receipt {
                    return Err(LedgerError::Replay(format!(
                        "receipt mismatch for {} in block {}",
                        tx.id(),
                        stored.number
                    )));
                }
            }
        }
        *ledger.store.lock() = Some(log);
        Ok(ledger)
    }

    pub fn deploy(&self, address: Address, code: Arc<dyn ContractExecutor>) {
        self.contracts.write().insert(address, code);
    }

    pub fn schedule(&self) -> &GasSchedule {
        &self.schedule
    }

    pub fn gas_price(&self) -> Wei {
        self.gas_price
    }

    pub fn head(&self) -> u64 {
        self.state.read().blocks.len() as u64 - 1
    }

    pub fn balance(&self, account: &Address) -> Wei {
        self.state.read().balance_of(account)
    }

    pub fn nonce(&self, account: &Address) -> u64 {
        self.state.read().accounts.get(account).map_or(0, |a| a.nonce)
    }

    pub fn storage_at(&self, contract: &Address, key: &H256) -> H256 {
        self.state.read().storage_at(contract, key)
    }

    pub fn block(&self, number: u64) -> Option<Block> {
        self.state.read().blocks.get(number as usize).cloned()
    }

    /// Looks up a committed transaction and its receipt.
    pub fn transaction(&self, tx_id: &H256) -> Option<(u64, Transaction, Receipt)> {
        let state = self.state.read();
        let number = *state.tx_index.get(tx_id)?;
        let block = &state.blocks[number as usize];
        let pos = block.receipts.iter().position(|r| &r.tx_id == tx_id)?;
        Some((number, block.transactions[pos].clone(), block.receipts[pos].clone()))
    }

    pub fn snapshot(&self) -> StateSnapshot {
        let state = self.state.read();
        StateSnapshot {
            accounts: state.accounts.iter().map(|(k, v)| (*k, *v)).collect(),
            storage: state.storage.iter().map(|(k, v)| (*k, *v)).collect(),
            head: state.blocks.len() as u64 - 1,
        }
    }

    /// Executes `tx` and appends a block holding its receipt.
    pub fn submit(&self, tx: Transaction) -> Result<Receipt, LedgerError> {
        self.apply(tx, true)
    }

    fn apply(&self, tx: Transaction, persist: bool) -> Result<Receipt, LedgerError> {
        let mut state = self.state.write();
        let sender = state.accounts.get(&tx.from).copied().unwrap_or_default();
        if tx.nonce != sender.nonce {
            return Err(LedgerError::BadNonce {
                expected: sender.nonce,
                got: tx.nonce,
            });
        }
        let max_fee = tx.gas_limit as Wei * self.gas_price;
        let need = tx.value.saturating_add(max_fee);
        if sender.balance < need {
            return Err(LedgerError::InsufficientBalance {
                need,
                have: sender.balance,
            });
        }

        let tx_id = tx.id();
        let intrinsic = self.schedule.intrinsic_cost(&tx.calldata);
        let code = self
            .contracts
            .read()
            .get(&tx.to)
            .cloned()
            .unwrap_or_else(|| Arc::new(NoopExecutor));

        let outcome = if intrinsic > tx.gas_limit {
            Err((crate::ledger::Revert::new("intrinsic gas exceeds limit"), tx.gas_limit))
        } else {
            let mut ctx = ExecutionContext::new(
                tx.from,
                tx.to,
                tx.value,
                &tx.calldata,
                &self.schedule,
                &*state,
                tx.gas_limit - intrinsic,
            );
            match code.execute(&mut ctx) {
                Ok(()) => Ok(ctx.finish()),
                Err(revert) => {
                    let used = intrinsic + ctx.gas_used();
                    Err((revert, used))
                }
            }
        };

        let effects = match outcome {
            Ok(effects) => effects,
            Err((revert, gas_used)) => {
                return Err(LedgerError::Reverted {
                    reason: revert.reason,
                    receipt: Receipt {
                        tx_id,
                        status: TxStatus::Revert,
                        gas_used,
                        logs: Vec::new(),
                    },
                });
            }
        };

        let gas_used = intrinsic + effects.gas_used;
        let receipt = Receipt {
            tx_id,
            status: TxStatus::Success,
            gas_used,
            logs: effects.logs,
        };
        let number = state.blocks.len() as u64;
        let block = Block {
            number,
            log_bloom: Block::bloom_for(std::slice::from_ref(&receipt)),
            transactions: vec![tx.clone()],
            receipts: vec![receipt.clone()],
        };

        if persist {
            if let Some(log) = self.store.lock().as_mut() {
                log.append(&block)?;
            }
        }

        let fee = gas_used as Wei * self.gas_price;
        let from = state.accounts.entry(tx.from).or_default();
        from.balance -= tx.value + fee;
        from.nonce += 1;
        state.accounts.entry(tx.to).or_default().balance += tx.value;
        for (key, value) in effects.writes {
            if value.is_zero() {
                state.storage.remove(&(tx.to, key));
            } else {
                state.storage.insert((tx.to, key), value);
            }
        }
        state.tx_index.insert(tx_id, number);
        state.blocks.push(block);
        Ok(receipt)
    }

    /// Runs contract code against current state without committing anything
    /// and without charging the caller.
    pub fn call(&self, from: Address, to: Address, value: Wei, calldata: &[u8]) -> CallOutcome {
        self.call_with(from, to, value, calldata, calldata)
    }

    /// Like [`Ledger::call`], but prices calldata as if `priced_calldata`
    /// had been sent. Estimation entry points use this to report the cost of
    /// the call they stand in for.
    pub fn call_with(
        &self,
        from: Address,
        to: Address,
        value: Wei,
        calldata: &[u8],
        priced_calldata: &[u8],
    ) -> CallOutcome {
        let state = self.state.read();
        let code = self
            .contracts
            .read()
            .get(&to)
            .cloned()
            .unwrap_or_else(|| Arc::new(NoopExecutor));
        let intrinsic = self.schedule.intrinsic_cost(priced_calldata);
        let mut ctx = ExecutionContext::new(
            from,
            to,
            value,
            calldata,
            &self.schedule,
            &*state,
            u64::MAX - intrinsic,
        );
        match code.execute(&mut ctx) {
            Ok(()) => {
                let effects = ctx.finish();
                CallOutcome {
                    gas_used: intrinsic + effects.gas_used,
                    logs: effects.logs,
                    revert: None,
                }
            }
            Err(revert) => CallOutcome {
                gas_used: intrinsic + ctx.gas_used(),
                logs: Vec::new(),
                revert: Some(revert.reason),
            },
        }
    }

    /// Every log in `[from_block, to_block]` carrying `topic`, in chain order.
    pub fn find_logs(
        &self,
        from_block: u64,
        to_block: u64,
        topic: H256,
    ) -> Result<Vec<(u64, LogEntry)>, LedgerError> {
        Ok(self
            .find_logs_filtered(from_block, to_block, &LogFilter::topic(topic))?
            .logs)
    }

    /// Bloom-pruned log query. Blocks whose bloom rejects the filter are
    /// skipped without touching their receipts.
    pub fn find_logs_filtered(
        &self,
        from_block: u64,
        to_block: u64,
        filter: &LogFilter,
    ) -> Result<LogQuery, LedgerError> {
        let state = self.state.read();
        let head = state.blocks.len() as u64 - 1;
        if from_block > to_block || to_block > head {
            return Err(LedgerError::RangeOutOfBounds {
                from: from_block,
                to: to_block,
                head,
            });
        }
        let mut query = LogQuery {
            blocks_in_range: to_block - from_block + 1,
            ..LogQuery::default()
        };
        for block in &state.blocks[from_block as usize..=to_block as usize] {
            if !filter.bloom_admits(&block.log_bloom) {
                continue;
            }
            query.blocks_bloom_matched += 1;
            query.blocks_scanned += 1;
            for log in block.receipts.iter().flat_map(|r| r.logs.iter()) {
                if filter.matches(log) {
                    query.logs.push((block.number, log.clone()));
                }
            }
        }
        Ok(query)
    }
}
