//! Prints one PASS/FAIL line per acceptance criterion.

use std::process::ExitCode;

use hyperadiabatic::check::Checker;

fn main() -> ExitCode {
    let checker = Checker::new(0);
    let mut failures = Vec::new();
    for id in 1..=8 {
        let outcome = checker.run(id).expect("known criterion");
        println!("{outcome}");
        if !outcome.passed {
            failures.push(id);
        }
    }
    if failures.is_empty() {
        println!("acceptance: all criteria passed");
        ExitCode::SUCCESS
    } else {
        println!("acceptance: failed criteria {failures:?}");
        ExitCode::FAILURE
    }
}
