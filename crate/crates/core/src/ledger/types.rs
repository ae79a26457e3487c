use serde::{Deserialize, Serialize};

use super::bloom::Bloom2048;
use crate::hash::{keccak256, Address, H256};

pub type Wei = u128;

/// Default gas limit used by the helpers that build transactions.
pub const DEFAULT_GAS_LIMIT: u64 = 30_000_000;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Transaction {
    pub from: Address,
    pub to: Address,
    pub value: Wei,
    #[serde(with = "hex_bytes")]
    pub calldata: Vec<u8>,
    pub nonce: u64,
    pub gas_limit: u64,
}

impl Transaction {
    pub fn new(from: Address, to: Address, nonce: u64) -> Self {
        Transaction {
            from,
            to,
            value: 0,
            calldata: Vec::new(),
            nonce,
            gas_limit: DEFAULT_GAS_LIMIT,
        }
    }

    pub fn with_value(mut self, value: Wei) -> Self {
        self.value = value;
        self
    }

    pub fn with_calldata(mut self, calldata: Vec<u8>) -> Self {
        self.calldata = calldata;
        self
    }

    pub fn with_gas_limit(mut self, gas_limit: u64) -> Self {
        self.gas_limit = gas_limit;
        self
    }

    /// Keccak-256 over the fixed-order field encoding.
    pub fn id(&self) -> H256 {
        let mut buf = Vec::with_capacity(20 + 20 + 16 + 8 + 8 + self.calldata.len());
        buf.extend_from_slice(&self.from.0);
        buf.extend_from_slice(&self.to.0);
        buf.extend_from_slice(&self.value.to_be_bytes());
        buf.extend_from_slice(&self.nonce.to_be_bytes());
        buf.extend_from_slice(&self.gas_limit.to_be_bytes());
        buf.extend_from_slice(&self.calldata);
        keccak256(buf)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LogEntry {
    pub emitter: Address,
    pub topics: Vec<H256>,
    #[serde(with = "hex_bytes")]
    pub data: Vec<u8>,
}

impl LogEntry {
    pub const MAX_TOPICS: usize = 4;

    pub fn has_topic(&self, topic: &H256) -> bool {
        self.topics.contains(topic)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TxStatus {
    Success,
    Revert,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Receipt {
    pub tx_id: H256,
    pub status: TxStatus,
    pub gas_used: u64,
    pub logs: Vec<LogEntry>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Block {
    pub number: u64,
    pub transactions: Vec<Transaction>,
    pub receipts: Vec<Receipt>,
    pub log_bloom: Bloom2048,
}

impl Block {
    pub fn genesis() -> Self {
        Block {
            number: 0,
            transactions: Vec::new(),
            receipts: Vec::new(),
            log_bloom: Bloom2048::new(),
        }
    }

    /// Bloom over every log's emitter address and topics.
    pub fn bloom_for(receipts: &[Receipt]) -> Bloom2048 {
        let mut bloom = Bloom2048::new();
        for log in receipts.iter().flat_map(|r| r.logs.iter()) {
            bloom.insert(&log.emitter.0);
            for topic in &log.topics {
                bloom.insert(&topic.0);
            }
        }
        bloom
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Account {
    pub balance: Wei,
    pub nonce: u64,
}

pub(crate) mod hex_bytes {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(bytes: &[u8], serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(&hex::encode(bytes))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(deserializer: D) -> Result<Vec<u8>, D::Error> {
        let s = String::deserialize(deserializer)?;
        hex::decode(s).map_err(serde::de::Error::custom)
    }
}
