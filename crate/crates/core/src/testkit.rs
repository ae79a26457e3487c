//! Record generators for benchmarks and tests.

use num_bigint::BigUint;
use rand::distributions::{Alphanumeric, DistString};
use rand::Rng;

use crate::castore::ContentId;
use crate::registry::{AppRecord, RepackVerdict};

/// A plausible record for a well-known app: 19-byte package, 5-byte
/// version, 4-byte serial and a 50-character origin URL.
pub fn typical_record() -> AppRecord {
    AppRecord {
        package_name: "com.tencent.mobileqq".into(),
        version: "8.4.1".into(),
        cert_serial: BigUint::from(0x706a_633eu32),
        origin_url: "http://www.wandoujia.com/apps/com.tencent.mobileqq".into(),
        repack_verdict: RepackVerdict::Pass,
        content_id: ContentId::of(b"com.tencent.mobileqq 8.4.1"),
    }
}

fn segment<R: Rng>(rng: &mut R, len: usize) -> String {
    let mut s = Alphanumeric.sample_string(rng, len).to_ascii_lowercase();
    if s.as_bytes()[0].is_ascii_digit() {
        s.replace_range(0..1, "a");
    }
    s
}

/// Package 10-40 bytes, version 3-12, serial 4-20 bytes, URL 40-120.
pub fn random_record<R: Rng>(rng: &mut R) -> AppRecord {
    let package_len = rng.gen_range(10..=40);
    let mut package_name = String::from("com.");
    while package_name.len() < package_len {
        let room = package_len - package_name.len();
        let take = room.min(rng.gen_range(3..=10));
        package_name.push_str(&segment(rng, take));
        if package_name.len() + 2 <= package_len {
            package_name.push('.');
        }
    }
    let package_name = package_name.trim_end_matches('.').to_string();

    let version_len = rng.gen_range(3..=12);
    let mut version = rng.gen_range(0..10).to_string();
    while version.len() < version_len {
        version.push(if version.len() % 2 == 1 { '.' } else { char::from(b'0' + rng.gen_range(0..10)) });
    }
    let version = version.trim_end_matches('.').to_string();

    let serial_len = rng.gen_range(4..=20);
    let mut serial = vec![0u8; serial_len];
    rng.fill(serial.as_mut_slice());
    serial[0] |= 0x01;

    let url_len = rng.gen_range(40..=120);
    let prefix = "https://market.example/detail/";
    let origin_url = format!("{prefix}{}", segment(rng, url_len - prefix.len()));

    let verdicts = [RepackVerdict::Pass, RepackVerdict::Fail, RepackVerdict::Unchecked];
    let content_id = ContentId::of(package_name.as_bytes());
    AppRecord {
        package_name,
        version,
        cert_serial: BigUint::from_bytes_be(&serial),
        origin_url,
        repack_verdict: verdicts[rng.gen_range(0..verdicts.len())],
        content_id,
    }
}

/// `n` records with distinct (package, version) identities.
pub fn random_records<R: Rng>(rng: &mut R, n: usize) -> Vec<AppRecord> {
    let mut seen = std::collections::HashSet::new();
    let mut out = Vec::with_capacity(n);
    while out.len() < n {
        let r = random_record(rng);
        if seen.insert((r.package_name.clone(), r.version.clone())) {
            out.push(r);
        }
    }
    out
}
