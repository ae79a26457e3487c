//! 2048-bit log bloom in the Ethereum header layout.
//!
//! Each inserted value sets three bits. The bit indices come from the first
//! six bytes of the Keccak-256 digest of the value, read as three big-endian
//! 16-bit integers, each reduced modulo 2048. Bit `i` lives in byte
//! `255 - i / 8` at position `i % 8`, so the vector matches the header
//! bloom produced by Ethereum clients.

use std::fmt;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::hash::keccak256;

pub const BLOOM_BYTES: usize = 256;
pub const BLOOM_BITS: usize = BLOOM_BYTES * 8;

#[derive(Clone, Copy, PartialEq, Eq)]
pub struct Bloom2048(pub [u8; BLOOM_BYTES]);

impl Default for Bloom2048 {
    fn default() -> Self {
        Bloom2048([0u8; BLOOM_BYTES])
    }
}

/// The three bit positions a value maps to.
pub fn bit_indices(value: &[u8]) -> [usize; 3] {
    let digest = keccak256(value);
    let d = digest.as_bytes();
    [0, 2, 4].map(|i| (u16::from_be_bytes([d[i], d[i + 1]]) as usize) % BLOOM_BITS)
}

impl Bloom2048 {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, value: &[u8]) {
        for bit in bit_indices(value) {
            self.0[BLOOM_BYTES - 1 - bit / 8] |= 1 << (bit % 8);
        }
    }

    /// Builder-style insert.
    pub fn with(mut self, value: &[u8]) -> Self {
        self.insert(value);
        self
    }

    pub fn contains(&self, value: &[u8]) -> bool {
        bit_indices(value)
            .iter()
            .all(|bit| self.0[BLOOM_BYTES - 1 - bit / 8] & (1 << (bit % 8)) != 0)
    }

    pub fn is_set(&self, bit: usize) -> bool {
        self.0[BLOOM_BYTES - 1 - bit / 8] & (1 << (bit % 8)) != 0
    }

    pub fn count_ones(&self) -> u32 {
        self.0.iter().map(|b| b.count_ones()).sum()
    }

    pub fn accrue(&mut self, other: &Bloom2048) {
        for (a, b) in self.0.iter_mut().zip(other.0.iter()) {
            *a |= b;
        }
    }

    pub fn is_empty(&self) -> bool {
        self.0.iter().all(|b| *b == 0)
    }
}

impl fmt::Debug for Bloom2048 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Bloom2048({} bits set)", self.count_ones())
    }
}

impl Serialize for Bloom2048 {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(&hex::encode(self.0))
    }
}

impl<'de> Deserialize<'de> for Bloom2048 {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        let bytes = hex::decode(&s).map_err(serde::de::Error::custom)?;
        let arr: [u8; BLOOM_BYTES] = bytes
            .try_into()
            .map_err(|_| serde::de::Error::custom("bloom must be 256 bytes"))?;
        Ok(Bloom2048(arr))
    }
}
