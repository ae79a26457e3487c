use std::path::Path;

use appgate::castore::scenario::run_text;

#[test]
fn bundled_scenarios_pass() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("scenarios");
    let mut seen = 0;
    for entry in std::fs::read_dir(&dir).unwrap() {
        let path = entry.unwrap().path();
        if path.extension().and_then(|e| e.to_str()) != Some("scn") {
            continue;
        }
        let outcome = run_text(&std::fs::read_to_string(&path).unwrap()).unwrap();
        let failed: Vec<_> = outcome.failures().collect();
        assert!(failed.is_empty(), "{}: {failed:#?}", path.display());
        assert!(!outcome.checks.is_empty());
        seen += 1;
    }
    assert_eq!(seen, 4);
}
