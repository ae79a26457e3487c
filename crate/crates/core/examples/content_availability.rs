//! Availability of content after the uploader goes offline, with and
//! without gateway caching, refreshing and consortium pinning.
//!
//! Runs the bundled scenario files, or the ones given on the command line.

use std::path::PathBuf;

use appgate::castore::scenario::run_text;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut files: Vec<PathBuf> = std::env::args().skip(1).map(PathBuf::from).collect();
    if files.is_empty() {
        let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("scenarios");
        files = std::fs::read_dir(dir)?.filter_map(|e| e.ok().map(|e| e.path())).collect();
        files.sort();
    }
    let mut failed = 0;
    for file in files {
        let outcome = run_text(&std::fs::read_to_string(&file)?)?;
        println!("{}", file.display());
        for c in &outcome.checks {
            let mark = if c.passed { "ok  " } else { "FAIL" };
            println!("  {mark} line {:>2}: {} ({})", c.line, c.description, c.detail);
        }
        failed += outcome.failures().count();
    }
    if failed > 0 {
        return Err(format!("{failed} check(s) failed").into());
    }
    Ok(())
}
