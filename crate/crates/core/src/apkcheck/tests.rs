use num_bigint::BigUint;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::fixture::{resign, signature_block, tlv, write_zip, ApkBuilder};
use super::*;

fn big(v: u64) -> BigUint {
    BigUint::from(v)
}

#[test]
fn extracts_documented_serial() {
    let apk = ApkBuilder::new("com.tencent.mobileqq", "8.4.1", 0x706a633eu32).build();
    let summary = parse_apk(&apk).unwrap();
    assert_eq!(summary.cert_serial, big(0x706a633e));
    assert_eq!(format!("{:#x}", summary.cert_serial), "0x706a633e");
}

#[test]
fn extracts_manifest_fields() {
    let apk = ApkBuilder::new("com.example.a", "1.2", 7u8).build();
    let summary = parse_apk(&apk).unwrap();
    assert_eq!(summary.package_name, "com.example.a");
    assert_eq!(summary.version_name, "1.2");
}

#[test]
fn first_certificate_wins() {
    let apk = ApkBuilder::new("com.x", "1", 0x11u8).chain_certificate(0x22u8).build();
    assert_eq!(parse_apk(&apk).unwrap().cert_serial, big(0x11));
}

#[test]
fn high_bit_serial_is_unsigned() {
    let serial = BigUint::parse_bytes(b"ff00112233445566778899aabbccddeeff001122", 16).unwrap();
    let apk = ApkBuilder::new("com.x", "1", serial.clone()).build();
    assert_eq!(parse_apk(&apk).unwrap().cert_serial, serial);
}

#[test]
fn v1_certificate_without_version_field() {
    // TBSCertificate starting directly with the serial INTEGER.
    let tbs = tlv(0x30, &[tlv(0x02, &[0x05, 0x39]), tlv(0x30, &[])].concat());
    let cert = tlv(0x30, &tbs);
    let signed = tlv(
        0x30,
        &[tlv(0x02, &[1]), tlv(0x31, &[]), tlv(0x30, &[]), tlv(0xa0, &cert), tlv(0x31, &[])].concat(),
    );
    let block = tlv(0x30, &[tlv(0x06, der::OID_SIGNED_DATA), tlv(0xa0, &signed)].concat());
    assert_eq!(first_certificate_serial(&block).unwrap(), &[0x05, 0x39]);
}

#[test]
fn truncated_der_is_malformed() {
    let block = signature_block(&[big(0x706a633e)], "x");
    for cut in [1, 2, 10, block.len() / 2, block.len() - 1] {
        let apk = write_zip(&[
            (MANIFEST_ENTRY.into(), b"package=a\nversionName=1\n".to_vec()),
            ("META-INF/CERT.RSA".into(), block[..cut].to_vec()),
        ]);
        assert!(
            matches!(parse_apk(&apk), Err(ApkError::MalformedDer(_))),
            "cut at {cut}"
        );
    }
}

#[test]
fn structural_errors() {
    assert!(matches!(parse_apk(b"not a zip"), Err(ApkError::NotAZip(_))));
    assert!(matches!(parse_apk(&[]), Err(ApkError::NotAZip(_))));
    assert_eq!(
        parse_apk(&ApkBuilder::new("a", "1", 1u8).without_manifest().build()),
        Err(ApkError::MissingManifest)
    );
    assert_eq!(
        parse_apk(&ApkBuilder::new("a", "1", 1u8).unsigned().build()),
        Err(ApkError::MissingSignature)
    );
    let two = ApkBuilder::new("a", "1", 1u8)
        .entry("META-INF/OTHER.DSA", signature_block(&[big(2)], "a"))
        .build();
    assert_eq!(parse_apk(&two), Err(ApkError::MultipleSignatures(2)));
}

#[test]
fn signature_entry_naming() {
    for name in ["META-INF/CERT.RSA", "META-INF/KEY.DSA", "META-INF/A.EC", "META-INF/x.rsa"] {
        let apk = ApkBuilder::new("a", "1", 3u8).signature_entry(name).build();
        assert_eq!(parse_apk(&apk).unwrap().cert_serial, big(3), "{name}");
    }
    for name in ["META-INF/sub/CERT.RSA", "CERT.RSA", "META-INF/.RSA", "META-INF/CERT.SF"] {
        let apk = ApkBuilder::new("a", "1", 3u8).signature_entry(name).build();
        assert_eq!(parse_apk(&apk), Err(ApkError::MissingSignature), "{name}");
    }
}

#[test]
fn manifest_parsing() {
    assert_eq!(
        parse_manifest(b"# c\n package = p \nversionCode=3\nversionName=2.0\n").unwrap(),
        ("p".into(), "2.0".into())
    );
    assert!(parse_manifest(b"package=p\n").is_err());
    assert!(parse_manifest(b"versionName=1\n").is_err());
    assert!(parse_manifest(b"package=\nversionName=1").is_err());
    assert!(parse_manifest(b"garbage").is_err());
    assert!(parse_manifest(&[0xff, 0xfe]).is_err());
}

#[test]
fn repack_verdicts() {
    let mut db = SerialDb::new();
    db.insert("com.x", big(0x11));
    let summary = |pkg: &str, serial| ApkSummary {
        package_name: pkg.into(),
        version_name: "1".into(),
        cert_serial: big(serial),
    };
    assert_eq!(repack_check(&summary("com.x", 0x11), &db).verdict, RepackVerdict::Pass);
    let fail = repack_check(&summary("com.x", 0x22), &db);
    assert_eq!(fail.verdict, RepackVerdict::Fail);
    assert_eq!(fail.official, vec![big(0x11)]);
    assert!(fail.to_string().contains("0x22") && fail.to_string().contains("0x11"));
    assert_eq!(repack_check(&summary("com.y", 0x11), &db).verdict, RepackVerdict::Unchecked);
}

#[test]
fn serial_db_from_official_apks() {
    let a = ApkBuilder::new("com.x", "1", 0x11u8).build();
    let b = ApkBuilder::new("com.x", "2", 0x12u8).build();
    let db = build_serial_db(&[a.clone(), b]).unwrap();
    assert_eq!(db.serials("com.x").unwrap().len(), 2);
    assert!(build_serial_db::<Vec<u8>>(&[]).unwrap().is_empty());

    let err = build_serial_db(&[a, b"junk".to_vec()]).unwrap_err();
    assert_eq!(err.index, 1);
    assert!(matches!(err.source, ApkError::NotAZip(_)));
}

#[test]
fn serial_db_file_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("serials.tsv");
    assert!(SerialDb::load(&path).unwrap().is_empty());

    SerialDb::append_to(&path, &[("com.x".into(), big(0x706a633e))]).unwrap();
    SerialDb::append_to(&path, &[("com.x".into(), big(0x11)), ("com.y".into(), big(1))]).unwrap();
    let db = SerialDb::load(&path).unwrap();
    assert_eq!(db.len(), 3);
    assert!(db.contains("com.x", &big(0x706a633e)));
    assert_eq!(SerialDb::parse(&db.render()).unwrap(), db);

    assert_eq!(std::fs::read_to_string(&path).unwrap().lines().next(), Some("com.x\t706a633e"));
    assert!(SerialDb::parse("com.x 11").is_err());
    assert!(SerialDb::parse("com.x\tzz").is_err());
    assert!(SerialDb::parse("\t11").is_err());
    assert!(SerialDb::parse("# header\n\ncom.x\t0x11\n").unwrap().contains("com.x", &big(0x11)));
}

#[test]
fn resigning_changes_only_the_serial() {
    let original = ApkBuilder::new("com.x", "3.1", 0xaaaau16).payload(vec![1, 2, 3]).build();
    let repack = resign(&original, &big(0xbbbb)).unwrap();
    let (a, b) = (parse_apk(&original).unwrap(), parse_apk(&repack).unwrap());
    assert_eq!((a.package_name.as_str(), a.version_name.as_str()), ("com.x", "3.1"));
    assert_eq!((b.package_name.as_str(), b.version_name.as_str()), ("com.x", "3.1"));
    assert_ne!(a.cert_serial, b.cert_serial);
    assert_eq!(resign(&original, &big(0xaaaa)).unwrap(), original);
}

#[test]
fn fuzzed_archives_fail_with_typed_errors() {
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let seeds = [
        ApkBuilder::new("com.fuzz", "1.0", 0x706a633eu32).build(),
        ApkBuilder::new("com.fuzz.chain", "2", 0x1234u16).chain_certificate(9u8).build(),
    ];
    let mut parsed_ok = 0;
    for i in 0..10_000 {
        let mut bytes = seeds[i % seeds.len()].clone();
        match rng.gen_range(0..4) {
            0 => {
                for _ in 0..rng.gen_range(1..4) {
                    let at = rng.gen_range(0..bytes.len());
                    bytes[at] ^= 1 << rng.gen_range(0..8);
                }
            }
            1 => {
                let at = rng.gen_range(0..bytes.len());
                bytes[at] = rng.gen();
            }
            2 => bytes.truncate(rng.gen_range(0..bytes.len())),
            _ => {
                let at = rng.gen_range(0..bytes.len());
                let junk: Vec<u8> = (0..rng.gen_range(1..16)).map(|_| rng.gen()).collect();
                bytes.splice(at..at, junk);
            }
        }
        if parse_apk(&bytes).is_ok() {
            parsed_ok += 1;
        }
    }
    // flips inside stored payloads leave the archive valid
    assert!(parsed_ok < 10_000);
}

proptest! {
    #[test]
    fn parse_recovers_authored_fields(
        package in "[a-z]{1,8}(\\.[a-z]{1,8}){0,3}",
        version in "[0-9]{1,3}(\\.[0-9]{1,3}){0,2}",
        serial in proptest::collection::vec(any::<u8>(), 1..24),
    ) {
        let serial = BigUint::from_bytes_be(&serial);
        prop_assume!(serial != BigUint::from(0u8));
        let apk = ApkBuilder::new(&package, &version, serial.clone()).build();
        let summary = parse_apk(&apk).unwrap();
        prop_assert_eq!(summary.package_name, package);
        prop_assert_eq!(summary.version_name, version);
        prop_assert_eq!(summary.cert_serial, serial);
        prop_assert_eq!(parse_apk(&apk).unwrap(), parse_apk(&apk.clone()).unwrap());
    }
}
