//! Acceptance criteria A1–A9, one pass/fail line per criterion.
//!
//! Runs without the libtest harness so that every line is printed; the
//! process fails when any gated criterion fails.

use std::process::ExitCode;

use pencil_kde::validate::{overall, run_all, ValidationOptions};

fn main() -> ExitCode {
    let results = run_all(&ValidationOptions::default());
    for r in &results {
        println!("{r}");
    }
    let ok = overall(&results);
    println!(
        "acceptance: {}",
        if ok {
            "all gated criteria passed"
        } else {
            "some gated criteria failed"
        }
    );
    if ok {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
