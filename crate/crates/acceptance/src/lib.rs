//! Runner for the acceptance criteria: one verdict line per criterion.

use std::panic::{self, AssertUnwindSafe};
use std::time::Instant;

#[derive(Debug, Clone, PartialEq)]
pub struct Verdict {
    pub pass: bool,
    pub detail: String,
}

impl Verdict {
    pub fn new(pass: bool, detail: impl Into<String>) -> Self {
        Verdict { pass, detail: detail.into() }
    }
}

pub struct Criterion {
    pub number: u32,
    pub title: &'static str,
    pub run: fn() -> Verdict,
}

/// Runs one criterion, turning a panic into a failing verdict.
pub fn run_one(c: &Criterion) -> (Verdict, f64) {
    let start = Instant::now();
    let verdict = match panic::catch_unwind(AssertUnwindSafe(c.run)) {
        Ok(v) => v,
        Err(e) => {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panicked".into());
            Verdict::new(false, format!("panic: {msg}"))
        }
    };
    (verdict, start.elapsed().as_secs_f64())
}

pub fn format_line(c: &Criterion, v: &Verdict, secs: f64) -> String {
    let status = if v.pass { "PASS" } else { "FAIL" };
    format!("criterion {} {}: {status} ({}; {secs:.1} s)", c.number, c.title, v.detail)
}

/// Runs the criteria whose numbers appear in `selected` (all when empty),
/// printing a line for each. Returns true when every one passed.
pub fn run_all(criteria: &[Criterion], selected: &[u32]) -> bool {
    let mut all = true;
    for c in criteria.iter().filter(|c| selected.is_empty() || selected.contains(&c.number)) {
        let (v, secs) = run_one(c);
        println!("{}", format_line(c, &v, secs));
        all &= v.pass;
    }
    all
}
