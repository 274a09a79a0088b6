//! Prints one PASS/FAIL line per acceptance criterion and fails if any criterion fails.

use std::io::Write;
use std::process::ExitCode;

fn main() -> ExitCode {
    let verdicts = bbm_lab::acceptance::run_all(|v| {
        println!("{}", v.line());
        let _ = std::io::stdout().flush();
    });
    let failed: Vec<u8> = verdicts.iter().filter(|v| !v.passed).map(|v| v.id).collect();
    println!("acceptance: {} of {} criteria passed", verdicts.len() - failed.len(), verdicts.len());
    if failed.is_empty() {
        ExitCode::SUCCESS
    } else {
        println!("failed criteria: {failed:?}");
        ExitCode::FAILURE
    }
}
