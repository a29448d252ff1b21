//! Runs acceptance criteria 1 to 10 and prints one PASS/FAIL line each.
//! Exits non-zero if any criterion fails or overruns its time budget.

use std::process::ExitCode;
use std::time::Instant;

use confgauge_core::suite::criterion;

/// Wall-clock budget per criterion, seconds.
const BUDGET: [f64; 10] = [5.0, 30.0, 60.0, 60.0, 60.0, 60.0, 60.0, 60.0, 600.0, 120.0];

fn main() -> ExitCode {
    let verbose = std::env::args().any(|a| a == "--verbose");
    let mut failed = 0;
    for id in 1..=10u8 {
        let t = Instant::now();
        let rep = criterion(id, 0);
        let secs = t.elapsed().as_secs_f64();
        let in_time = secs <= BUDGET[id as usize - 1];
        let pass = rep.pass && in_time;
        failed += usize::from(!pass);
        println!(
            "criterion {id:>2} {}  {} ({secs:.2} s of {:.0} s)",
            if pass { "PASS" } else { "FAIL" },
            rep.title,
            BUDGET[id as usize - 1]
        );
        for c in &rep.checks {
            if verbose || !c.pass {
                println!("    [{}] {}", if c.pass { "ok" } else { "FAIL" }, c.describe());
            }
        }
    }
    println!("acceptance: {} of 10 criteria passed", 10 - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
