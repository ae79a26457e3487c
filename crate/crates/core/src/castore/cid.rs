use std::fmt;
use std::str::FromStr;

use data_encoding::BASE32_NOPAD;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use sha2::{Digest, Sha256};

/// Self-certifying content identifier: SHA-256 of the stored bytes.
///
/// Binary form is one version byte followed by the 32-byte digest. The text
/// form is that binary form in lowercase unpadded RFC 4648 base32, 53
/// characters long.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ContentId {
    digest: [u8; 32],
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum CidError {
    #[error("content id must be {expected} bytes, got {got}")]
    BadLength { expected: usize, got: usize },
    #[error("unsupported content id version {0:#04x}")]
    BadVersion(u8),
    #[error("content id is not valid base32: {0}")]
    BadEncoding(String),
}

impl ContentId {
    pub const VERSION: u8 = 0x01;
    pub const BINARY_LEN: usize = 33;

    pub fn of(bytes: &[u8]) -> Self {
        ContentId {
            digest: Sha256::digest(bytes).into(),
        }
    }

    pub fn from_digest(digest: [u8; 32]) -> Self {
        ContentId { digest }
    }

    pub fn digest(&self) -> &[u8; 32] {
        &self.digest
    }

    /// True when `bytes` hash to this id.
    pub fn verifies(&self, bytes: &[u8]) -> bool {
        ContentId::of(bytes) == *self
    }

    pub fn to_binary(&self) -> [u8; Self::BINARY_LEN] {
        let mut out = [0u8; Self::BINARY_LEN];
        out[0] = Self::VERSION;
        out[1..].copy_from_slice(&self.digest);
        out
    }

    pub fn from_binary(bytes: &[u8]) -> Result<Self, CidError> {
        if bytes.len() != Self::BINARY_LEN {
            return Err(CidError::BadLength {
                expected: Self::BINARY_LEN,
                got: bytes.len(),
            });
        }
        if bytes[0] != Self::VERSION {
            return Err(CidError::BadVersion(bytes[0]));
        }
        let mut digest = [0u8; 32];
        digest.copy_from_slice(&bytes[1..]);
        Ok(ContentId { digest })
    }
}

impl fmt::Display for ContentId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&BASE32_NOPAD.encode(&self.to_binary()).to_ascii_lowercase())
    }
}

impl fmt::Debug for ContentId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "ContentId({self})")
    }
}

impl FromStr for ContentId {
    type Err = CidError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s.bytes().any(|b| b.is_ascii_uppercase()) {
            return Err(CidError::BadEncoding(s.to_string()));
        }
        let bytes = BASE32_NOPAD
            .decode(s.to_ascii_uppercase().as_bytes())
            .map_err(|_| CidError::BadEncoding(s.to_string()))?;
        ContentId::from_binary(&bytes)
    }
}

impl Serialize for ContentId {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for ContentId {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn empty_input_digest() {
        // sha256("") from coreutils sha256sum
        let cid = ContentId::of(b"");
        assert_eq!(
            hex::encode(cid.digest()),
            "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855"
        );
        // python: base64.b32encode(b"\x01" + sha256(b"").digest()).lower()
        assert_eq!(
            cid.to_string(),
            "ahr3brcctd6byfe27p2mrglpxescplsb4rsjxe2muskzsg3ykk4fk"
        );
    }

    #[test]
    fn rejects_bad_text() {
        let text = ContentId::of(b"x").to_string();
        assert!(text.to_uppercase().parse::<ContentId>().is_err());
        assert!(text[..50].parse::<ContentId>().is_err());
        assert!("not base32!".parse::<ContentId>().is_err());
        let mut bin = ContentId::of(b"x").to_binary();
        bin[0] = 0x02;
        assert_eq!(ContentId::from_binary(&bin), Err(CidError::BadVersion(2)));
    }

    proptest! {
        #[test]
        fn text_round_trip(bytes in proptest::collection::vec(any::<u8>(), 0..256)) {
            let cid = ContentId::of(&bytes);
            prop_assert_eq!(cid.to_string().parse::<ContentId>().unwrap(), cid);
            prop_assert!(cid.verifies(&bytes));
        }
    }
}
