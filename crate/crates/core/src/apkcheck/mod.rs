//! APK inspection and certificate-serial repackaging detection.
//!
//! An APK here is a ZIP archive holding a cleartext manifest entry
//! ([`MANIFEST_ENTRY`], `key=value` lines with at least `package` and
//! `versionName`) and exactly one PKCS#7 signature block under `META-INF/`
//! ending in `.RSA`, `.DSA` or `.EC`. Binary AXML manifests are not read.

mod der;
pub mod fixture;
mod serialdb;

use std::io::{Cursor, Read};

use num_bigint::BigUint;
use serde::{Deserialize, Serialize};

pub use der::{first_certificate_serial, read_tlv, Tlv};
pub use serialdb::{build_serial_db, BuildError, SerialDb};

use crate::registry::RepackVerdict;

pub const MANIFEST_ENTRY: &str = "AndroidManifest.txt";
const SIGNATURE_SUFFIXES: [&str; 3] = [".RSA", ".DSA", ".EC"];
const MAX_MANIFEST_BYTES: u64 = 64 * 1024;
const MAX_SIGNATURE_BYTES: u64 = 1024 * 1024;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ApkError {
    #[error("not a zip archive: {0}")]
    NotAZip(String),
    #[error("archive has no {MANIFEST_ENTRY} entry")]
    MissingManifest,
    #[error("manifest: {0}")]
    MalformedManifest(String),
    #[error("archive has no META-INF signature block")]
    MissingSignature,
    #[error("archive has {0} signature blocks, expected one")]
    MultipleSignatures(usize),
    #[error("malformed DER in signature block: {0}")]
    MalformedDer(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ApkSummary {
    pub package_name: String,
    pub version_name: String,
    #[serde(with = "crate::registry::serial_hex")]
    pub cert_serial: BigUint,
}

fn is_signature_block(name: &str) -> bool {
    let Some(file) = name.strip_prefix("META-INF/") else {
        return false;
    };
    !file.contains('/')
        && SIGNATURE_SUFFIXES
            .iter()
            .any(|suffix| file.len() > suffix.len() && file.to_ascii_uppercase().ends_with(suffix))
}

fn read_entry(
    archive: &mut zip::ZipArchive<Cursor<&[u8]>>,
    name: &str,
    limit: u64,
) -> Result<Vec<u8>, ApkError> {
    let entry = archive
        .by_name(name)
        .map_err(|e| ApkError::NotAZip(format!("{name}: {e}")))?;
    let mut out = Vec::new();
    entry
        .take(limit)
        .read_to_end(&mut out)
        .map_err(|e| ApkError::NotAZip(format!("{name}: {e}")))?;
    Ok(out)
}

/// Parses `package=` and `versionName=` from the cleartext manifest.
pub fn parse_manifest(text: &[u8]) -> Result<(String, String), ApkError> {
    let text = std::str::from_utf8(text)
        .map_err(|_| ApkError::MalformedManifest("not utf-8".into()))?;
    let (mut package, mut version) = (None, None);
    for line in text.lines().map(str::trim) {
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(ApkError::MalformedManifest(format!("line without '=': {line}")));
        };
        match key.trim() {
            "package" => package = Some(value.trim().to_string()),
            "versionName" => version = Some(value.trim().to_string()),
            _ => {}
        }
    }
    let package = package
        .filter(|p| !p.is_empty())
        .ok_or_else(|| ApkError::MalformedManifest("missing package".into()))?;
    let version = version
        .filter(|v| !v.is_empty())
        .ok_or_else(|| ApkError::MalformedManifest("missing versionName".into()))?;
    Ok((package, version))
}

/// Reads package name, version and signing-certificate serial from an APK.
pub fn parse_apk(bytes: &[u8]) -> Result<ApkSummary, ApkError> {
    let mut archive = zip::ZipArchive::new(Cursor::new(bytes))
        .map_err(|e| ApkError::NotAZip(e.to_string()))?;

    let names: Vec<String> = archive.file_names().map(str::to_string).collect();
    if !names.iter().any(|n| n == MANIFEST_ENTRY) {
        return Err(ApkError::MissingManifest);
    }
    let signatures: Vec<&String> = names.iter().filter(|n| is_signature_block(n)).collect();
    let signature = match signatures.as_slice() {
        [] => return Err(ApkError::MissingSignature),
        [one] => one.as_str(),
        many => return Err(ApkError::MultipleSignatures(many.len())),
    };

    let manifest = read_entry(&mut archive, MANIFEST_ENTRY, MAX_MANIFEST_BYTES)?;
    let (package_name, version_name) = parse_manifest(&manifest)?;
    let block = read_entry(&mut archive, signature, MAX_SIGNATURE_BYTES)?;
    let serial = first_certificate_serial(&block)?;
    Ok(ApkSummary {
        package_name,
        version_name,
        cert_serial: BigUint::from_bytes_be(serial),
    })
}

/// Verdict plus the official serials it was judged against.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RepackOutcome {
    pub verdict: RepackVerdict,
    pub observed: BigUint,
    pub official: Vec<BigUint>,
}

impl std::fmt::Display for RepackOutcome {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self.verdict {
            RepackVerdict::Unchecked => write!(f, "unchecked: package not in serial database"),
            RepackVerdict::Pass => write!(f, "pass: serial {:#x} is official", self.observed),
            RepackVerdict::Fail => {
                write!(f, "fail: serial {:#x} not among official", self.observed)?;
                for s in &self.official {
                    write!(f, " {s:#x}")?;
                }
                Ok(())
            }
        }
    }
}

/// Compares the summary's serial against the official serials for its package.
pub fn repack_check(summary: &ApkSummary, db: &SerialDb) -> RepackOutcome {
    let official = db.serials(&summary.package_name);
    let verdict = match official {
        None => RepackVerdict::Unchecked,
        Some(set) if set.contains(&summary.cert_serial) => RepackVerdict::Pass,
        Some(_) => RepackVerdict::Fail,
    };
    RepackOutcome {
        verdict,
        observed: summary.cert_serial.clone(),
        official: official.map(|s| s.iter().cloned().collect()).unwrap_or_default(),
    }
}

#[cfg(test)]
mod tests;
