//! Runs every acceptance criterion on the full sweep and prints one
//! PASS/FAIL line each; exits nonzero if any fails.

use std::process::ExitCode;

use elastica::verify::run_all;

fn main() -> ExitCode {
    let results = run_all(false);
    for r in &results {
        println!("{}", r.line());
    }
    let failed = results.iter().filter(|r| !r.passed).count();
    println!("acceptance: {} passed, {failed} failed", results.len() - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
