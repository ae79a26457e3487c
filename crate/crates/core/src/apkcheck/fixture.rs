//! Synthetic APK construction for tests, examples and fixture markets.
//!
//! Archives are deterministic: fixed timestamps, stored entries in a fixed
//! order. Certificates are structurally valid X.509 DER with fake key and
//! signature bits; nothing here is cryptographically meaningful.

use std::io::{Cursor, Read, Write};

use num_bigint::BigUint;
use zip::write::SimpleFileOptions;
use zip::{CompressionMethod, ZipArchive, ZipWriter};

use super::der::{OID_SIGNED_DATA, TAG_CONTEXT_0, TAG_INTEGER, TAG_OID, TAG_SEQUENCE, TAG_SET};
use super::{is_signature_block, MANIFEST_ENTRY};

const TAG_NULL: u8 = 0x05;
const TAG_BIT_STRING: u8 = 0x03;
const TAG_UTF8: u8 = 0x0c;
const TAG_UTC_TIME: u8 = 0x17;

const OID_SHA256_RSA: &[u8] = &[0x2a, 0x86, 0x48, 0x86, 0xf7, 0x0d, 0x01, 0x01, 0x0b];
const OID_RSA: &[u8] = &[0x2a, 0x86, 0x48, 0x86, 0xf7, 0x0d, 0x01, 0x01, 0x01];
const OID_SHA256: &[u8] = &[0x60, 0x86, 0x48, 0x01, 0x65, 0x03, 0x04, 0x02, 0x01];
const OID_DATA: &[u8] = &[0x2a, 0x86, 0x48, 0x86, 0xf7, 0x0d, 0x01, 0x07, 0x01];
const OID_COMMON_NAME: &[u8] = &[0x55, 0x04, 0x03];

pub fn tlv(tag: u8, content: &[u8]) -> Vec<u8> {
    let mut out = vec![tag];
    let len = content.len();
    if len < 0x80 {
        out.push(len as u8);
    } else {
        let bytes: Vec<u8> = len.to_be_bytes().into_iter().skip_while(|&b| b == 0).collect();
        out.push(0x80 | bytes.len() as u8);
        out.extend(bytes);
    }
    out.extend_from_slice(content);
    out
}

fn seq(parts: &[Vec<u8>]) -> Vec<u8> {
    tlv(TAG_SEQUENCE, &parts.concat())
}

/// Non-negative INTEGER, padded so the sign bit stays clear.
pub fn der_integer(value: &BigUint) -> Vec<u8> {
    let mut bytes = value.to_bytes_be();
    if bytes[0] & 0x80 != 0 {
        bytes.insert(0, 0);
    }
    tlv(TAG_INTEGER, &bytes)
}

fn name(common_name: &str) -> Vec<u8> {
    seq(&[tlv(TAG_SET, &seq(&[tlv(TAG_OID, OID_COMMON_NAME), tlv(TAG_UTF8, common_name.as_bytes())]))])
}

fn algorithm(oid: &[u8]) -> Vec<u8> {
    seq(&[tlv(TAG_OID, oid), tlv(TAG_NULL, &[])])
}

/// Filler bits derived from the serial so different keys give different blobs.
fn fake_bits(serial: &BigUint, len: usize) -> Vec<u8> {
    let seed = serial.to_bytes_be();
    let mut out = vec![0u8];
    out.extend((0..len).map(|i| seed[i % seed.len()].wrapping_mul(31).wrapping_add(i as u8)));
    out
}

/// An X.509 v3 certificate with the given serial.
pub fn certificate(serial: &BigUint, subject: &str) -> Vec<u8> {
    let tbs = seq(&[
        tlv(TAG_CONTEXT_0, &der_integer(&BigUint::from(2u8))),
        der_integer(serial),
        algorithm(OID_SHA256_RSA),
        name(subject),
        seq(&[tlv(TAG_UTC_TIME, b"200101000000Z"), tlv(TAG_UTC_TIME, b"491231235959Z")]),
        name(subject),
        seq(&[algorithm(OID_RSA), tlv(TAG_BIT_STRING, &fake_bits(serial, 64))]),
    ]);
    seq(&[tbs, algorithm(OID_SHA256_RSA), tlv(TAG_BIT_STRING, &fake_bits(serial, 128))])
}

/// PKCS#7 SignedData carrying `chain` in order; the first is the signer.
pub fn signature_block(chain: &[BigUint], subject: &str) -> Vec<u8> {
    assert!(!chain.is_empty(), "signature block needs a certificate");
    let certs: Vec<u8> = chain.iter().flat_map(|s| certificate(s, subject)).collect();
    let signer_info = seq(&[
        der_integer(&BigUint::from(1u8)),
        seq(&[name(subject), der_integer(&chain[0])]),
        algorithm(OID_SHA256),
        algorithm(OID_RSA),
        tlv(0x04, &fake_bits(&chain[0], 32)),
    ]);
    let signed_data = seq(&[
        der_integer(&BigUint::from(1u8)),
        tlv(TAG_SET, &algorithm(OID_SHA256)),
        seq(&[tlv(TAG_OID, OID_DATA)]),
        tlv(TAG_CONTEXT_0, &certs),
        tlv(TAG_SET, &signer_info),
    ]);
    seq(&[tlv(TAG_OID, OID_SIGNED_DATA), tlv(TAG_CONTEXT_0, &signed_data)])
}

/// Builder for a synthetic APK.
#[derive(Debug, Clone)]
pub struct ApkBuilder {
    package: String,
    version: String,
    chain: Vec<BigUint>,
    signature_entry: Option<String>,
    manifest: bool,
    entries: Vec<(String, Vec<u8>)>,
}

impl ApkBuilder {
    pub fn new(package: &str, version: &str, serial: impl Into<BigUint>) -> Self {
        Self {
            package: package.into(),
            version: version.into(),
            chain: vec![serial.into()],
            signature_entry: Some("META-INF/CERT.RSA".into()),
            manifest: true,
            entries: vec![("classes.dex".into(), format!("dex:{package}:{version}").into_bytes())],
        }
    }

    /// Replaces the default code payload.
    pub fn payload(mut self, bytes: impl Into<Vec<u8>>) -> Self {
        self.entries[0].1 = bytes.into();
        self
    }

    pub fn entry(mut self, name: &str, bytes: impl Into<Vec<u8>>) -> Self {
        self.entries.push((name.into(), bytes.into()));
        self
    }

    /// Appends a certificate after the signer's.
    pub fn chain_certificate(mut self, serial: impl Into<BigUint>) -> Self {
        self.chain.push(serial.into());
        self
    }

    pub fn signature_entry(mut self, name: &str) -> Self {
        self.signature_entry = Some(name.into());
        self
    }

    pub fn unsigned(mut self) -> Self {
        self.signature_entry = None;
        self
    }

    pub fn without_manifest(mut self) -> Self {
        self.manifest = false;
        self
    }

    pub fn build(&self) -> Vec<u8> {
        let mut files = Vec::new();
        if self.manifest {
            let text = format!("package={}\nversionName={}\n", self.package, self.version);
            files.push((MANIFEST_ENTRY.to_string(), text.into_bytes()));
        }
        files.extend(self.entries.iter().cloned());
        if let Some(name) = &self.signature_entry {
            files.push((name.clone(), signature_block(&self.chain, &self.package)));
        }
        write_zip(&files)
    }
}

fn options() -> SimpleFileOptions {
    SimpleFileOptions::default()
        .compression_method(CompressionMethod::Stored)
        .last_modified_time(zip::DateTime::default())
}

/// Writes the entries, in order, as a deterministic stored archive.
pub fn write_zip(files: &[(String, Vec<u8>)]) -> Vec<u8> {
    let mut writer = ZipWriter::new(Cursor::new(Vec::new()));
    for (name, bytes) in files {
        writer.start_file(name.as_str(), options()).expect("in-memory zip");
        writer.write_all(bytes).expect("in-memory zip");
    }
    writer.finish().expect("in-memory zip").into_inner()
}

/// Same archive content, signature block replaced by one for `serial`.
///
/// This is what a repackager does: keep everything, sign with their own key.
pub fn resign(apk: &[u8], serial: &BigUint) -> Result<Vec<u8>, zip::result::ZipError> {
    let mut archive = ZipArchive::new(Cursor::new(apk))?;
    let mut files = Vec::new();
    let mut package = String::from("repackaged");
    for i in 0..archive.len() {
        let mut entry = archive.by_index(i)?;
        let name = entry.name().to_string();
        let mut bytes = Vec::new();
        entry.read_to_end(&mut bytes)?;
        if name == MANIFEST_ENTRY {
            if let Ok((p, _)) = super::parse_manifest(&bytes) {
                package = p;
            }
        }
        if !is_signature_block(&name) {
            files.push((name, bytes));
        }
    }
    files.push(("META-INF/CERT.RSA".into(), signature_block(std::slice::from_ref(serial), &package)));
    Ok(write_zip(&files))
}
