use std::collections::BTreeSet;
use std::fmt;
use std::io;
use std::path::Path;

use md5::{Digest as _, Md5};
use num_bigint::BigUint;
use serde::{Deserialize, Serialize};
use sha2::Sha256;

use super::RetrievedApp;
use crate::registry::serial_hex;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum VerdictChannel {
    HttpsDirect,
    ChecksumVerified,
    HttpsRewritten,
    KnownAppMatch,
    KnownDeveloperMatch,
    UnverifiedWarning,
    Rejected,
}

impl VerdictChannel {
    pub const ALL: [VerdictChannel; 7] = [
        VerdictChannel::HttpsDirect,
        VerdictChannel::ChecksumVerified,
        VerdictChannel::HttpsRewritten,
        VerdictChannel::KnownAppMatch,
        VerdictChannel::KnownDeveloperMatch,
        VerdictChannel::UnverifiedWarning,
        VerdictChannel::Rejected,
    ];
}

impl fmt::Display for VerdictChannel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            VerdictChannel::HttpsDirect => "httpsDirect",
            VerdictChannel::ChecksumVerified => "checksumVerified",
            VerdictChannel::HttpsRewritten => "httpsRewritten",
            VerdictChannel::KnownAppMatch => "knownAppMatch",
            VerdictChannel::KnownDeveloperMatch => "knownDeveloperMatch",
            VerdictChannel::UnverifiedWarning => "unverifiedWarning",
            VerdictChannel::Rejected => "rejected",
        };
        f.write_str(name)
    }
}

/// How the retrieved bytes were authenticated, if at all.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SecurityVerdict {
    pub channel: VerdictChannel,
    pub detail: String,
}

impl SecurityVerdict {
    pub fn new(channel: VerdictChannel, detail: impl Into<String>) -> Self {
        Self {
            channel,
            detail: detail.into(),
        }
    }

    pub fn admits_upload(&self) -> bool {
        self.channel != VerdictChannel::Rejected
    }

    pub fn is_warning(&self) -> bool {
        self.channel == VerdictChannel::UnverifiedWarning
    }
}

impl fmt::Display for SecurityVerdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.channel, self.detail)
    }
}

pub fn md5_hex(bytes: &[u8]) -> String {
    hex::encode(Md5::digest(bytes))
}

pub fn sha256(bytes: &[u8]) -> [u8; 32] {
    Sha256::digest(bytes).into()
}

/// Compares a declared MD5 against a computed one.
pub fn verify_digest(declared: &str, computed: &str) -> SecurityVerdict {
    if declared.eq_ignore_ascii_case(computed) {
        SecurityVerdict::new(VerdictChannel::ChecksumVerified, format!("md5 {computed} matches page"))
    } else {
        SecurityVerdict::new(
            VerdictChannel::Rejected,
            format!(
                "checksum mismatch: page declares {}, downloaded file is {}",
                declared.to_ascii_lowercase(),
                computed.to_ascii_lowercase()
            ),
        )
    }
}

/// MD5 of the bytes against the page's declared checksum.
pub fn verify_checksum(app: &RetrievedApp) -> SecurityVerdict {
    match &app.declared_checksum {
        Some(declared) => verify_digest(declared, &md5_hex(&app.bytes)),
        None => SecurityVerdict::new(VerdictChannel::Rejected, "no declared checksum to verify against"),
    }
}

/// Local stand-ins for a repository of known-good apps and for a list of
/// trusted developer certificates.
///
/// Both files are one hex value per line (`#` comments allowed): SHA-256
/// digests of APK files, and certificate serials.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct FallbackEvidence {
    pub known_apps: BTreeSet<[u8; 32]>,
    pub developer_serials: BTreeSet<BigUint>,
}

fn data_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'))
}

fn read_optional(path: &Path) -> io::Result<String> {
    match std::fs::read_to_string(path) {
        Err(e) if e.kind() == io::ErrorKind::NotFound => Ok(String::new()),
        other => other,
    }
}

fn invalid(msg: String) -> io::Error {
    io::Error::new(io::ErrorKind::InvalidData, msg)
}

impl FallbackEvidence {
    pub fn parse(known_apps: &str, developer_serials: &str) -> Result<Self, String> {
        let mut evidence = Self::default();
        for (n, line) in data_lines(known_apps) {
            let digest: [u8; 32] = hex::decode(line)
                .ok()
                .and_then(|v| v.try_into().ok())
                .ok_or_else(|| format!("known apps line {n}: expected 64 hex characters"))?;
            evidence.known_apps.insert(digest);
        }
        for (n, line) in data_lines(developer_serials) {
            let serial = serial_hex::parse(line)
                .ok_or_else(|| format!("developer serials line {n}: bad hex"))?;
            evidence.developer_serials.insert(serial);
        }
        Ok(evidence)
    }

    /// Missing files count as empty.
    pub fn load(known_apps: &Path, developer_serials: &Path) -> io::Result<Self> {
        Self::parse(&read_optional(known_apps)?, &read_optional(developer_serials)?).map_err(invalid)
    }

    pub fn render(&self) -> (String, String) {
        let apps = self.known_apps.iter().map(|d| format!("{}\n", hex::encode(d))).collect();
        let serials = self
            .developer_serials
            .iter()
            .map(|s| format!("{}\n", s.to_str_radix(16)))
            .collect();
        (apps, serials)
    }

    pub fn add_known_app(&mut self, bytes: &[u8]) {
        self.known_apps.insert(sha256(bytes));
    }
}

/// Verification for insecure downloads that carry no checksum.
pub fn fallback_verify(
    app: &RetrievedApp,
    evidence: &FallbackEvidence,
    cert_serial: Option<&BigUint>,
) -> SecurityVerdict {
    let digest = sha256(&app.bytes);
    if evidence.known_apps.contains(&digest) {
        return SecurityVerdict::new(
            VerdictChannel::KnownAppMatch,
            format!("sha256 {} is a known app", hex::encode(digest)),
        );
    }
    if let Some(serial) = cert_serial.filter(|s| evidence.developer_serials.contains(s)) {
        return SecurityVerdict::new(
            VerdictChannel::KnownDeveloperMatch,
            format!("signed by known developer certificate {serial:#x}"),
        );
    }
    SecurityVerdict::new(
        VerdictChannel::UnverifiedWarning,
        "retrieved over an insecure channel without checksum; app may not be authentic",
    )
}

/// The single verdict for a retrieved app.
///
/// | declared checksum | transport | verdict |
/// |---|---|---|
/// | present | any | `checksumVerified` or `rejected` |
/// | absent | https, original URL | `httpsDirect` |
/// | absent | https, rewritten URL | `httpsRewritten` |
/// | absent | http | `knownAppMatch`, `knownDeveloperMatch` or `unverifiedWarning` |
pub fn assess(
    app: &RetrievedApp,
    evidence: &FallbackEvidence,
    cert_serial: Option<&BigUint>,
) -> SecurityVerdict {
    if app.declared_checksum.is_some() {
        let mut verdict = verify_checksum(app);
        if app.transport_secure && verdict.admits_upload() {
            verdict.detail.push_str(" (over https)");
        }
        return verdict;
    }
    match (app.transport_secure, app.rewritten) {
        (true, false) => SecurityVerdict::new(
            VerdictChannel::HttpsDirect,
            format!("retrieved over https from {}", app.download_url),
        ),
        (true, true) => SecurityVerdict::new(
            VerdictChannel::HttpsRewritten,
            format!("download upgraded to {}", app.download_url),
        ),
        (false, _) => fallback_verify(app, evidence, cert_serial),
    }
}

const UNVERIFIED_FRAGMENT: &str = "unverified";

/// The origin URL stored on chain; insecurely retrieved apps carry a
/// `#unverified` fragment so the warning travels with the record.
pub fn annotate_origin(page_url: &str, verdict: &SecurityVerdict) -> String {
    if !verdict.is_warning() {
        return page_url.to_string();
    }
    match url::Url::parse(page_url) {
        Ok(mut url) => {
            url.set_fragment(Some(UNVERIFIED_FRAGMENT));
            url.to_string()
        }
        Err(_) => format!("{page_url}#{UNVERIFIED_FRAGMENT}"),
    }
}

pub fn is_flagged_unverified(origin_url: &str) -> bool {
    origin_url.ends_with(&format!("#{UNVERIFIED_FRAGMENT}"))
}
