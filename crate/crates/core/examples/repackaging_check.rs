//! Detecting repackaged apps by their signing-certificate serial.

use appgate::apkcheck::fixture::{resign, ApkBuilder};
use appgate::apkcheck::{build_serial_db, parse_apk, repack_check};
use num_bigint::BigUint;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let official: Vec<Vec<u8>> = [("com.tencent.mobileqq", 0x706a633eu32), ("com.example.notes", 0x1234)]
        .iter()
        .map(|(pkg, serial)| ApkBuilder::new(pkg, "1.0", *serial).build())
        .collect();
    let db = build_serial_db(&official)?;
    println!("serial database:\n{}", db.render());

    let original = parse_apk(&official[0])?;
    println!("original   {}", repack_check(&original, &db));

    let repackaged = resign(&official[0], &BigUint::from(0xdead_beefu32))?;
    let summary = parse_apk(&repackaged)?;
    println!("repackaged {}", repack_check(&summary, &db));

    let unknown = parse_apk(&ApkBuilder::new("org.unlisted", "2.1", 9u32).build())?;
    println!("unlisted   {}", repack_check(&unknown, &db));
    Ok(())
}
