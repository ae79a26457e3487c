//! On-chain app metadata and its canonical byte encoding.
//!
//! Fields are written in fixed order. Every variable-length field carries a
//! 2-byte big-endian length prefix:
//!
//! ```text
//! u16 len | packageName (UTF-8)
//! u16 len | version (UTF-8)
//! u16 len | certSerial (minimal big-endian magnitude, empty for zero)
//! u16 len | originUrl (UTF-8)
//! u8      | repackVerdict (0 = unchecked, 1 = pass, 2 = fail)
//! u16 len | contentId (binary form: 0x01 || sha256)
//! ```
//!
//! Decoding rejects trailing bytes, non-minimal serials and unknown verdicts,
//! so every byte string has at most one decoding.

use std::fmt;

use num_bigint::BigUint;
use serde::{Deserialize, Serialize};

use crate::castore::ContentId;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RepackVerdict {
    Unchecked,
    Pass,
    Fail,
}

impl RepackVerdict {
    pub fn to_byte(self) -> u8 {
        match self {
            RepackVerdict::Unchecked => 0,
            RepackVerdict::Pass => 1,
            RepackVerdict::Fail => 2,
        }
    }

    pub fn from_byte(b: u8) -> Option<Self> {
        match b {
            0 => Some(RepackVerdict::Unchecked),
            1 => Some(RepackVerdict::Pass),
            2 => Some(RepackVerdict::Fail),
            _ => None,
        }
    }
}

impl fmt::Display for RepackVerdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            RepackVerdict::Unchecked => "unchecked",
            RepackVerdict::Pass => "pass",
            RepackVerdict::Fail => "fail",
        })
    }
}

/// The metadata stored for each uploaded app version.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct AppRecord {
    pub package_name: String,
    pub version: String,
    #[serde(with = "serial_hex")]
    pub cert_serial: BigUint,
    pub origin_url: String,
    pub repack_verdict: RepackVerdict,
    pub content_id: ContentId,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum RecordError {
    #[error("package name is empty")]
    EmptyPackage,
    #[error("version is empty")]
    EmptyVersion,
    #[error("{0} contains a NUL byte")]
    NulByte(&'static str),
    #[error("{0} exceeds 65535 bytes")]
    TooLong(&'static str),
    #[error("record truncated")]
    Truncated,
    #[error("{0} is not valid UTF-8")]
    BadUtf8(&'static str),
    #[error("serial has a leading zero byte")]
    NonMinimalSerial,
    #[error("unknown verdict byte {0}")]
    BadVerdict(u8),
    #[error("bad content id: {0}")]
    BadContentId(String),
    #[error("{0} trailing bytes after record")]
    TrailingBytes(usize),
}

impl AppRecord {
    /// Uniqueness key bytes: `packageName || 0x00 || version`.
    pub fn identity_key(package_name: &str, version: &str) -> Vec<u8> {
        let mut key = Vec::with_capacity(package_name.len() + 1 + version.len());
        key.extend_from_slice(package_name.as_bytes());
        key.push(0);
        key.extend_from_slice(version.as_bytes());
        key
    }

    pub fn key(&self) -> (String, String) {
        (self.package_name.clone(), self.version.clone())
    }

    pub fn validate(&self) -> Result<(), RecordError> {
        if self.package_name.is_empty() {
            return Err(RecordError::EmptyPackage);
        }
        if self.version.is_empty() {
            return Err(RecordError::EmptyVersion);
        }
        if self.package_name.contains('\0') {
            return Err(RecordError::NulByte("package name"));
        }
        if self.version.contains('\0') {
            return Err(RecordError::NulByte("version"));
        }
        for (name, len) in [
            ("package name", self.package_name.len()),
            ("version", self.version.len()),
            ("origin url", self.origin_url.len()),
            ("cert serial", serial_bytes(&self.cert_serial).len()),
        ] {
            if len > u16::MAX as usize {
                return Err(RecordError::TooLong(name));
            }
        }
        Ok(())
    }

    pub fn encode(&self) -> Result<Vec<u8>, RecordError> {
        self.validate()?;
        let serial = serial_bytes(&self.cert_serial);
        let cid = self.content_id.to_binary();
        let mut out = Vec::with_capacity(
            11 + self.package_name.len()
                + self.version.len()
                + serial.len()
                + self.origin_url.len()
                + cid.len(),
        );
        put(&mut out, self.package_name.as_bytes());
        put(&mut out, self.version.as_bytes());
        put(&mut out, &serial);
        put(&mut out, self.origin_url.as_bytes());
        out.push(self.repack_verdict.to_byte());
        put(&mut out, &cid);
        Ok(out)
    }

    pub fn decode(bytes: &[u8]) -> Result<Self, RecordError> {
        let mut reader = Reader { bytes, pos: 0 };
        let record = reader.record()?;
        if reader.pos != bytes.len() {
            return Err(RecordError::TrailingBytes(bytes.len() - reader.pos));
        }
        Ok(record)
    }

    /// Decodes one record from the front of `bytes`, returning it and the
    /// number of bytes consumed.
    pub fn decode_prefix(bytes: &[u8]) -> Result<(Self, usize), RecordError> {
        let mut reader = Reader { bytes, pos: 0 };
        let record = reader.record()?;
        Ok((record, reader.pos))
    }

    /// Total encoded length of the record at the front of `bytes`, once
    /// enough of it is visible to tell.
    pub fn encoded_len_hint(bytes: &[u8]) -> Option<usize> {
        let mut pos = 0usize;
        for field in 0..5 {
            if field == 4 {
                pos += 1;
            }
            let hdr = bytes.get(pos..pos + 2)?;
            pos += 2 + u16::from_be_bytes([hdr[0], hdr[1]]) as usize;
        }
        Some(pos)
    }
}

fn put(out: &mut Vec<u8>, field: &[u8]) {
    out.extend_from_slice(&(field.len() as u16).to_be_bytes());
    out.extend_from_slice(field);
}

/// Minimal big-endian magnitude; zero encodes as no bytes.
pub fn serial_bytes(serial: &BigUint) -> Vec<u8> {
    if serial.bits() == 0 {
        Vec::new()
    } else {
        serial.to_bytes_be()
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], RecordError> {
        let end = self.pos.checked_add(n).ok_or(RecordError::Truncated)?;
        let slice = self.bytes.get(self.pos..end).ok_or(RecordError::Truncated)?;
        self.pos = end;
        Ok(slice)
    }

    fn field(&mut self) -> Result<&'a [u8], RecordError> {
        let hdr = self.take(2)?;
        let len = u16::from_be_bytes([hdr[0], hdr[1]]) as usize;
        self.take(len)
    }

    fn text(&mut self, name: &'static str) -> Result<String, RecordError> {
        let raw = self.field()?;
        String::from_utf8(raw.to_vec()).map_err(|_| RecordError::BadUtf8(name))
    }

    fn record(&mut self) -> Result<AppRecord, RecordError> {
        let package_name = self.text("package name")?;
        let version = self.text("version")?;
        let serial = self.field()?;
        if serial.first() == Some(&0) {
            return Err(RecordError::NonMinimalSerial);
        }
        let origin_url = self.text("origin url")?;
        let verdict_byte = self.take(1)?[0];
        let repack_verdict =
            RepackVerdict::from_byte(verdict_byte).ok_or(RecordError::BadVerdict(verdict_byte))?;
        let content_id = ContentId::from_binary(self.field()?)
            .map_err(|e| RecordError::BadContentId(e.to_string()))?;
        let record = AppRecord {
            package_name,
            version,
            cert_serial: BigUint::from_bytes_be(serial),
            origin_url,
            repack_verdict,
            content_id,
        };
        record.validate()?;
        Ok(record)
    }
}

pub mod serial_hex {
    use num_bigint::BigUint;
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &BigUint, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&format!("0x{}", v.to_str_radix(16)))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<BigUint, D::Error> {
        let s = String::deserialize(d)?;
        parse(&s).ok_or_else(|| serde::de::Error::custom(format!("bad hex serial {s}")))
    }

    /// Hex with optional `0x` prefix.
    pub fn parse(s: &str) -> Option<BigUint> {
        let digits = s.trim().strip_prefix("0x").unwrap_or(s.trim());
        BigUint::parse_bytes(digits.as_bytes(), 16)
    }
}
