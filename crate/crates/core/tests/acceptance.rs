//! Acceptance report: one PASS/FAIL line per criterion.
//!
//! The report is informational and always exits 0; `freelab verify
//! --suite acceptance` is the gate that exits 4 on any failure.

use freelab::verify;

fn main() {
    let seed = std::env::var("FREELAB_SEED").ok().and_then(|s| s.parse().ok()).unwrap_or(verify::DEFAULT_SEED);
    let mut passed = 0;
    for id in verify::CRITERIA.iter().map(|c| c.0) {
        let r = verify::criterion(id, seed);
        passed += r.passed as usize;
        let tag = if r.passed { "PASS" } else { "FAIL" };
        println!("{tag} {:>2} {} ({:.1} s): {}", r.id, r.name, r.seconds, r.detail);
    }
    println!("{passed}/{} criteria passed", verify::CRITERIA.len());
}
