use std::collections::{BTreeMap, BTreeSet};
use std::fs::OpenOptions;
use std::io::{self, Write};
use std::path::Path;

use num_bigint::BigUint;

use super::{parse_apk, ApkError, ApkSummary};
use crate::registry::serial_hex;

/// Official signing serials per package.
///
/// File form: one `packageName<TAB>hexSerial` per line; blank lines and
/// `#` comments are ignored. Appending is the only way to change it.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SerialDb {
    entries: BTreeMap<String, BTreeSet<BigUint>>,
}

#[derive(Debug, thiserror::Error)]
#[error("official apk #{index}: {source}")]
pub struct BuildError {
    pub index: usize,
    #[source]
    pub source: ApkError,
}

impl SerialDb {
    pub fn new() -> Self {
        Self::default()
    }

    /// Returns true if the pair was not already present.
    pub fn insert(&mut self, package: &str, serial: BigUint) -> bool {
        self.entries.entry(package.to_string()).or_default().insert(serial)
    }

    pub fn serials(&self, package: &str) -> Option<&BTreeSet<BigUint>> {
        self.entries.get(package)
    }

    pub fn contains(&self, package: &str, serial: &BigUint) -> bool {
        self.serials(package).is_some_and(|s| s.contains(serial))
    }

    pub fn packages(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.entries.values().map(BTreeSet::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &BigUint)> {
        self.entries
            .iter()
            .flat_map(|(p, set)| set.iter().map(move |s| (p.as_str(), s)))
    }

    /// Folds another database in; returns the pairs that were new.
    pub fn merge(&mut self, other: &SerialDb) -> Vec<(String, BigUint)> {
        let mut added = Vec::new();
        for (package, serial) in other.iter() {
            if self.insert(package, serial.clone()) {
                added.push((package.to_string(), serial.clone()));
            }
        }
        added
    }

    pub fn parse(text: &str) -> Result<Self, String> {
        let mut db = SerialDb::new();
        for (n, line) in text.lines().enumerate() {
            let line = line.trim_end_matches('\r');
            if line.trim().is_empty() || line.trim_start().starts_with('#') {
                continue;
            }
            let (package, serial) = line
                .split_once('\t')
                .ok_or_else(|| format!("line {}: expected package<TAB>serial", n + 1))?;
            let serial = serial_hex::parse(serial)
                .ok_or_else(|| format!("line {}: bad hex serial {serial:?}", n + 1))?;
            if package.is_empty() {
                return Err(format!("line {}: empty package", n + 1));
            }
            db.insert(package, serial);
        }
        Ok(db)
    }

    pub fn render(&self) -> String {
        self.iter()
            .map(|(p, s)| format!("{p}\t{}\n", s.to_str_radix(16)))
            .collect()
    }

    /// Loads the file, or an empty database if it does not exist.
    pub fn load(path: &Path) -> io::Result<Self> {
        match std::fs::read_to_string(path) {
            Ok(text) => Self::parse(&text).map_err(|e| io::Error::new(io::ErrorKind::InvalidData, e)),
            Err(e) if e.kind() == io::ErrorKind::NotFound => Ok(Self::new()),
            Err(e) => Err(e),
        }
    }

    /// Appends the given pairs to the file at `path`.
    pub fn append_to(path: &Path, pairs: &[(String, BigUint)]) -> io::Result<()> {
        if pairs.is_empty() {
            return Ok(());
        }
        let mut file = OpenOptions::new().create(true).append(true).open(path)?;
        let mut text = String::new();
        for (p, s) in pairs {
            text.push_str(&format!("{p}\t{}\n", s.to_str_radix(16)));
        }
        file.write_all(text.as_bytes())?;
        file.sync_data()
    }
}

impl FromIterator<ApkSummary> for SerialDb {
    fn from_iter<I: IntoIterator<Item = ApkSummary>>(iter: I) -> Self {
        let mut db = SerialDb::new();
        for summary in iter {
            db.insert(&summary.package_name, summary.cert_serial);
        }
        db
    }
}

/// Builds a database from official APKs, failing on the first unparsable one.
pub fn build_serial_db<B: AsRef<[u8]>>(official: &[B]) -> Result<SerialDb, BuildError> {
    official
        .iter()
        .enumerate()
        .map(|(index, bytes)| parse_apk(bytes.as_ref()).map_err(|source| BuildError { index, source }))
        .collect()
}
