use std::collections::HashSet;
use std::fs::OpenOptions;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use parking_lot::Mutex;
use serde::Serialize;

use crate::hash::{Address, H256};
use crate::ledger::{Ledger, Wei};

/// A donation transaction presented as payment for one upload.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct FeeTicket {
    pub tx_id: H256,
    pub payer: Address,
    #[serde(with = "wei_string")]
    pub value: Wei,
    pub consumed: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, thiserror::Error)]
#[serde(tag = "condition", rename_all = "camelCase", rename_all_fields = "camelCase")]
pub enum FeeRejection {
    #[error("transaction {tx_id} is not on chain")]
    UnknownTx { tx_id: H256 },
    #[error("transaction was sent to {to}, not the registry")]
    WrongDestination { to: Address },
    #[error("transaction value {value} is below the required {required}")]
    InsufficientValue {
        #[serde(with = "wei_string")]
        value: Wei,
        #[serde(with = "wei_string")]
        required: Wei,
    },
    #[error("transaction {tx_id} already paid for an upload")]
    AlreadyUsed { tx_id: H256 },
}

impl FeeRejection {
    pub fn condition(&self) -> &'static str {
        match self {
            FeeRejection::UnknownTx { .. } => "unknownTx",
            FeeRejection::WrongDestination { .. } => "wrongDestination",
            FeeRejection::InsufficientValue { .. } => "insufficientValue",
            FeeRejection::AlreadyUsed { .. } => "alreadyUsed",
        }
    }
}

pub(crate) mod wei_string {
    use serde::Serializer;

    pub fn serialize<S: Serializer>(v: &u128, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&v.to_string())
    }
}

/// Tickets consumed so far. A ticket is reserved while an upload is in
/// flight and either committed (appended to the ticket file) or released.
pub struct FeeBook {
    used: Mutex<HashSet<H256>>,
    path: Option<PathBuf>,
}

impl FeeBook {
    pub fn in_memory() -> Self {
        FeeBook {
            used: Mutex::new(HashSet::new()),
            path: None,
        }
    }

    /// Loads committed tickets from `path` (one hex tx id per line).
    pub fn open(path: &Path) -> io::Result<Self> {
        let mut used = HashSet::new();
        match std::fs::read_to_string(path) {
            Ok(text) => {
                for line in text.lines().map(str::trim).filter(|l| !l.is_empty()) {
                    let id = line
                        .parse()
                        .map_err(|e| io::Error::new(io::ErrorKind::InvalidData, format!("{line}: {e}")))?;
                    used.insert(id);
                }
            }
            Err(e) if e.kind() == io::ErrorKind::NotFound => {}
            Err(e) => return Err(e),
        }
        Ok(FeeBook {
            used: Mutex::new(used),
            path: Some(path.to_path_buf()),
        })
    }

    pub fn is_used(&self, tx_id: &H256) -> bool {
        self.used.lock().contains(tx_id)
    }

    pub fn used_count(&self) -> usize {
        self.used.lock().len()
    }

    /// Checks destination, value and freshness, in that order, and reserves
    /// the ticket if all hold.
    pub fn reserve(
        &self,
        ledger: &Ledger,
        registry: Address,
        tx_id: H256,
        required: Wei,
    ) -> Result<FeeTicket, FeeRejection> {
        let (_, tx, _) = ledger
            .transaction(&tx_id)
            .ok_or(FeeRejection::UnknownTx { tx_id })?;
        if tx.to != registry {
            return Err(FeeRejection::WrongDestination { to: tx.to });
        }
        if tx.value < required {
            return Err(FeeRejection::InsufficientValue {
                value: tx.value,
                required,
            });
        }
        if !self.used.lock().insert(tx_id) {
            return Err(FeeRejection::AlreadyUsed { tx_id });
        }
        Ok(FeeTicket {
            tx_id,
            payer: tx.from,
            value: tx.value,
            consumed: true,
        })
    }

    pub fn release(&self, tx_id: &H256) {
        self.used.lock().remove(tx_id);
    }

    pub fn commit(&self, tx_id: &H256) -> io::Result<()> {
        let Some(path) = &self.path else {
            return Ok(());
        };
        let mut file = OpenOptions::new().create(true).append(true).open(path)?;
        writeln!(file, "{tx_id}")?;
        file.sync_data()
    }
}
