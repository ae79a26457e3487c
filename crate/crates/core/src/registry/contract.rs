//! Registry contract code as executed by the ledger.
//!
//! Calldata is a 4-byte selector (first four bytes of the Keccak-256 of the
//! function signature) followed by arguments:
//!
//! | function             | arguments                                   |
//! |----------------------|---------------------------------------------|
//! | `storeApp`           | one encoded record                          |
//! | `storeAppBatch`      | u16 count, then `count` encoded records     |
//! | `storeAppEstimate`   | one encoded record                          |
//! | `storeAppBaseline`   | one encoded record                          |
//! | `donateGasFee`       | none (value attached)                       |
//! | `whitelistAdd`       | 20-byte address                             |
//! | `whitelistRemove`    | 20-byte address                             |

use serde::{Deserialize, Serialize};

use super::record::AppRecord;
use crate::hash::{keccak256, Address, H256};
use crate::ledger::{ContractExecutor, ExecutionContext, Revert};

/// Signature hashed into topic 0 of every upload log.
pub const APP_STORED_EVENT: &str = "AppStored(bytes32,bytes)";

pub const MAX_BATCH: usize = 500;

pub(crate) mod reasons {
    pub const NOT_WHITELISTED: &str = "NotWhitelisted";
    pub const NOT_OWNER: &str = "NotOwner";
    pub const MALFORMED_RECORD: &str = "MalformedRecord";
    pub const EMPTY_BATCH: &str = "EmptyBatch";
    pub const BATCH_TOO_LARGE: &str = "BatchTooLarge";
    pub const DUPLICATE_RECORD: &str = "DuplicateRecord";
    pub const ZERO_VALUE: &str = "ZeroValue";
    pub const UNKNOWN_FUNCTION: &str = "UnknownFunction";
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Function {
    StoreApp,
    StoreAppBatch,
    StoreAppEstimate,
    StoreAppBaseline,
    DonateGasFee,
    WhitelistAdd,
    WhitelistRemove,
}

impl Function {
    pub const ALL: [Function; 7] = [
        Function::StoreApp,
        Function::StoreAppBatch,
        Function::StoreAppEstimate,
        Function::StoreAppBaseline,
        Function::DonateGasFee,
        Function::WhitelistAdd,
        Function::WhitelistRemove,
    ];

    pub fn signature(self) -> &'static str {
        match self {
            Function::StoreApp => "storeApp(bytes)",
            Function::StoreAppBatch => "storeAppBatch(bytes[])",
            Function::StoreAppEstimate => "storeApp_estimate(bytes)",
            Function::StoreAppBaseline => "storeAppBaseline(bytes)",
            Function::DonateGasFee => "DonateGasFee()",
            Function::WhitelistAdd => "whitelistAdd(address)",
            Function::WhitelistRemove => "whitelistRemove(address)",
        }
    }

    pub fn selector(self) -> [u8; 4] {
        let digest = keccak256(self.signature().as_bytes());
        digest.0[..4].try_into().expect("4 bytes")
    }

    fn from_selector(sel: &[u8]) -> Option<Function> {
        Function::ALL.into_iter().find(|f| f.selector() == sel)
    }
}

/// Fixed execution cost of contract code the simulator does not interpret
/// instruction by instruction: dispatch, the access modifier, argument
/// decoding into memory and event encoding.
///
/// Storage, log and calldata costs are metered exactly by the ledger; these
/// two constants cover the rest. They are calibrated, not derived.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExecutionOverhead {
    /// Charged once per upload transaction.
    pub upload_call: u64,
    /// Charged once per record handled by an upload transaction.
    pub upload_record: u64,
}

impl Default for ExecutionOverhead {
    fn default() -> Self {
        ExecutionOverhead {
            upload_call: 30_000,
            upload_record: 30_000,
        }
    }
}

pub fn event_topic() -> H256 {
    keccak256(APP_STORED_EVENT.as_bytes())
}

/// Topic 1 of an upload log: Keccak-256 of `packageName || 0x00 || version`.
pub fn identity_topic(package_name: &str, version: &str) -> H256 {
    keccak256(AppRecord::identity_key(package_name, version))
}

pub fn whitelist_slot(member: &Address) -> H256 {
    let mut key = b"whitelist".to_vec();
    key.extend_from_slice(&member.0);
    keccak256(key)
}

pub fn baseline_count_slot() -> H256 {
    keccak256(b"baseline.count")
}

pub fn baseline_word_slot(index: u64, word: u64) -> H256 {
    let mut key = b"baseline.record".to_vec();
    key.extend_from_slice(&index.to_be_bytes());
    key.extend_from_slice(&word.to_be_bytes());
    keccak256(key)
}

pub mod calldata {
    use super::*;

    pub fn store_app(encoded: &[u8]) -> Vec<u8> {
        with_selector(Function::StoreApp, encoded)
    }

    pub fn store_app_estimate(encoded: &[u8]) -> Vec<u8> {
        with_selector(Function::StoreAppEstimate, encoded)
    }

    pub fn store_app_baseline(encoded: &[u8]) -> Vec<u8> {
        with_selector(Function::StoreAppBaseline, encoded)
    }

    pub fn store_app_batch(encoded: &[Vec<u8>]) -> Vec<u8> {
        let mut out = Function::StoreAppBatch.selector().to_vec();
        out.extend_from_slice(&(encoded.len() as u16).to_be_bytes());
        for rec in encoded {
            out.extend_from_slice(rec);
        }
        out
    }

    pub fn donate() -> Vec<u8> {
        Function::DonateGasFee.selector().to_vec()
    }

    pub fn whitelist_add(member: &Address) -> Vec<u8> {
        with_selector(Function::WhitelistAdd, &member.0)
    }

    pub fn whitelist_remove(member: &Address) -> Vec<u8> {
        with_selector(Function::WhitelistRemove, &member.0)
    }

    fn with_selector(f: Function, args: &[u8]) -> Vec<u8> {
        let mut out = f.selector().to_vec();
        out.extend_from_slice(args);
        out
    }
}

/// The registry contract. The owner is fixed at construction.
pub struct RegistryContract {
    owner: Address,
    overhead: ExecutionOverhead,
}

impl RegistryContract {
    pub fn new(owner: Address, overhead: ExecutionOverhead) -> Self {
        RegistryContract { owner, overhead }
    }

    pub fn owner(&self) -> Address {
        self.owner
    }

    fn only_owner(&self, ctx: &ExecutionContext<'_>) -> Result<(), Revert> {
        if ctx.caller != self.owner {
            return Err(Revert::new(reasons::NOT_OWNER));
        }
        Ok(())
    }

    fn only_whitelist(&self, ctx: &mut ExecutionContext<'_>) -> Result<(), Revert> {
        let slot = whitelist_slot(&ctx.caller);
        if ctx.sload(&slot)?.is_zero() {
            return Err(Revert::new(reasons::NOT_WHITELISTED));
        }
        Ok(())
    }

    fn push_record(&self, ctx: &mut ExecutionContext<'_>, record: &AppRecord, encoded: Vec<u8>) -> Result<(), Revert> {
        ctx.charge(self.overhead.upload_record)?;
        let topics = vec![
            event_topic(),
            identity_topic(&record.package_name, &record.version),
        ];
        ctx.emit(topics, encoded)
    }

    fn store_app(&self, ctx: &mut ExecutionContext<'_>, args: &[u8]) -> Result<(), Revert> {
        self.only_whitelist(ctx)?;
        ctx.charge(self.overhead.upload_call)?;
        let record = decode_one(args)?;
        self.push_record(ctx, &record, args.to_vec())
    }

    /// Same metering as `store_app` without the access check; logs are
    /// charged but dropped.
    fn store_app_estimate(&self, ctx: &mut ExecutionContext<'_>, args: &[u8]) -> Result<(), Revert> {
        ctx.discard_logs();
        ctx.charge(ctx.schedule().sload)?;
        ctx.charge(self.overhead.upload_call)?;
        let record = decode_one(args)?;
        self.push_record(ctx, &record, args.to_vec())
    }

    fn store_app_batch(&self, ctx: &mut ExecutionContext<'_>, args: &[u8]) -> Result<(), Revert> {
        self.only_whitelist(ctx)?;
        ctx.charge(self.overhead.upload_call)?;
        let count_bytes = args
            .get(..2)
            .ok_or_else(|| Revert::new(reasons::MALFORMED_RECORD))?;
        let count = u16::from_be_bytes([count_bytes[0], count_bytes[1]]) as usize;
        if count == 0 {
            return Err(Revert::new(reasons::EMPTY_BATCH));
        }
        if count > MAX_BATCH {
            return Err(Revert::new(reasons::BATCH_TOO_LARGE));
        }
        let mut rest = &args[2..];
        for _ in 0..count {
            let (record, used) = AppRecord::decode_prefix(rest)
                .map_err(|_| Revert::new(reasons::MALFORMED_RECORD))?;
            self.push_record(ctx, &record, rest[..used].to_vec())?;
            rest = &rest[used..];
        }
        if !rest.is_empty() {
            return Err(Revert::new(reasons::MALFORMED_RECORD));
        }
        Ok(())
    }

    fn store_app_baseline(&self, ctx: &mut ExecutionContext<'_>, args: &[u8]) -> Result<(), Revert> {
        self.only_whitelist(ctx)?;
        ctx.charge(self.overhead.upload_call)?;
        let record = decode_one(args)?;
        ctx.charge(self.overhead.upload_record)?;

        let count = ctx.sload(&baseline_count_slot())?.low_u64();
        for index in 0..count {
            let stored = load_baseline_record(ctx, index)?;
            if stored.package_name == record.package_name && stored.version == record.version {
                return Err(Revert::new(reasons::DUPLICATE_RECORD));
            }
        }
        for (word, chunk) in args.chunks(32).enumerate() {
            let mut value = [0u8; 32];
            value[..chunk.len()].copy_from_slice(chunk);
            ctx.sstore(baseline_word_slot(count, word as u64), H256(value))?;
        }
        ctx.sstore(baseline_count_slot(), H256::from_u64(count + 1))
    }

    fn donate(&self, ctx: &mut ExecutionContext<'_>) -> Result<(), Revert> {
        if ctx.value == 0 {
            return Err(Revert::new(reasons::ZERO_VALUE));
        }
        Ok(())
    }

    fn set_member(&self, ctx: &mut ExecutionContext<'_>, args: &[u8], member: bool) -> Result<(), Revert> {
        self.only_owner(ctx)?;
        let addr: [u8; 20] = args
            .try_into()
            .map_err(|_| Revert::new("MalformedAddress"))?;
        let value = if member { H256::from_u64(1) } else { H256::zero() };
        ctx.sstore(whitelist_slot(&Address(addr)), value)
    }
}

fn decode_one(args: &[u8]) -> Result<AppRecord, Revert> {
    AppRecord::decode(args).map_err(|_| Revert::new(reasons::MALFORMED_RECORD))
}

/// Reads stored record `index` word by word until its encoded length is known.
fn load_baseline_record(ctx: &mut ExecutionContext<'_>, index: u64) -> Result<AppRecord, Revert> {
    let mut buf = Vec::new();
    let mut word = 0u64;
    loop {
        if let Some(total) = AppRecord::encoded_len_hint(&buf) {
            if buf.len() >= total {
                buf.truncate(total);
                break;
            }
        }
        buf.extend_from_slice(&ctx.sload(&baseline_word_slot(index, word))?.0);
        word += 1;
    }
    AppRecord::decode(&buf).map_err(|_| Revert::new("CorruptStorage"))
}

impl ContractExecutor for RegistryContract {
    fn execute(&self, ctx: &mut ExecutionContext<'_>) -> Result<(), Revert> {
        let calldata = ctx.calldata;
        if calldata.len() < 4 {
            return Err(Revert::new(reasons::UNKNOWN_FUNCTION));
        }
        let (sel, args) = calldata.split_at(4);
        let function =
            Function::from_selector(sel).ok_or_else(|| Revert::new(reasons::UNKNOWN_FUNCTION))?;
        if ctx.value > 0 && function != Function::DonateGasFee {
            return Err(Revert::new("NonPayable"));
        }
        match function {
            Function::StoreApp => self.store_app(ctx, args),
            Function::StoreAppBatch => self.store_app_batch(ctx, args),
            Function::StoreAppEstimate => self.store_app_estimate(ctx, args),
            Function::StoreAppBaseline => self.store_app_baseline(ctx, args),
            Function::DonateGasFee => self.donate(ctx),
            Function::WhitelistAdd => self.set_member(ctx, args, true),
            Function::WhitelistRemove => self.set_member(ctx, args, false),
        }
    }
}
