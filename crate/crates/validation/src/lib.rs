//! Acceptance runner: each criterion prints one line with its verdict,
//! the measured quantity and the wall time against its budget.

use std::time::{Duration, Instant};

/// Measured outcome of one criterion.
pub struct Check {
    pub passed: bool,
    pub detail: String,
}

impl Check {
    pub fn new(passed: bool, detail: impl Into<String>) -> Self {
        Check { passed, detail: detail.into() }
    }

    pub fn error(e: impl std::fmt::Display) -> Self {
        Check { passed: false, detail: format!("error: {e}") }
    }
}

/// Runs `body`, prints `PASS|FAIL  #id  title  detail  [t / budget]`
/// and returns whether both the check and the time budget held.
pub fn criterion<F: FnOnce() -> Check>(id: u32, title: &str, budget: Duration, body: F) -> bool {
    let start = Instant::now();
    let check = body();
    let took = start.elapsed();
    let ok = check.passed && took <= budget;
    let over = if took > budget { ", over budget" } else { "" };
    println!(
        "{} {:>2}  {:<34} {}  [{:.2} s / {} s{}]",
        if ok { "PASS" } else { "FAIL" },
        id,
        title,
        check.detail,
        took.as_secs_f64(),
        budget.as_secs(),
        over
    );
    ok
}
