//! Acceptance run. Each criterion prints one PASS/FAIL line to stderr,
//! bypassing the harness capture, and the test fails if any criterion did.
//!
//!     cargo test -p frosette-core --release --test acceptance -- --nocapture

use std::io::Write;

#[test]
fn acceptance() {
    let mut err = std::io::stderr();
    let results = frosette::verify::run_all(|r| {
        writeln!(err, "{}", r.line()).unwrap();
    });
    assert_eq!(results.len(), 12);
    let failed: Vec<usize> = results.iter().filter(|r| !r.passed).map(|r| r.id).collect();
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
