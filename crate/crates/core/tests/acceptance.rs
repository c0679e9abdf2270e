//! Acceptance criteria. Prints one PASS/FAIL line per criterion along with
//! its wall time. Runs without the test harness so the lines always show.
//!
//! Criterion 7 is split into 7a (Cauchy-Riemann residual of F) and 7b (the
//! literal comparison of the displacement v with grad log|F|). 7b cannot hold:
//! for a unit-width Gaussian window v = grad log|Sf| = grad log|F| - (t, ω)/2,
//! and the (t, ω)/2 term is not small anywhere a tone with ω ≠ 0 has energy.
//! The report carries the corrected comparison, which agrees to rounding.

use std::collections::BTreeMap;
use std::time::{Duration, Instant};

use tfr_core::parallel::Execution;
use tfr_core::verify::{run_suite, CheckReport, VerifyOptions, SUITES};

const KNOWN_UNATTAINABLE: &[&str] = &["7b"];

fn criterion(id: &str) -> &str {
    id.trim_end_matches(|c: char| c.is_ascii_alphabetic())
}

fn main() {
    let opts = VerifyOptions {
        c: 1.0,
        execution: Execution::Parallel,
    };
    let mut reports: Vec<CheckReport> = Vec::new();
    let mut elapsed: BTreeMap<u32, Duration> = BTreeMap::new();
    for suite in SUITES.iter().filter(|s| **s != "all") {
        let start = Instant::now();
        let got = run_suite(suite, &opts).unwrap();
        let took = start.elapsed();
        for r in &got {
            *elapsed.entry(criterion(&r.id).parse().unwrap()).or_default() += took / got.len() as u32;
        }
        reports.extend(got);
    }
    let mut by_criterion: BTreeMap<u32, Vec<&CheckReport>> = BTreeMap::new();
    for r in &reports {
        println!("  {}", r.summary_line());
        for n in &r.notes {
            println!("      note: {n}");
        }
        by_criterion
            .entry(criterion(&r.id).parse().unwrap())
            .or_default()
            .push(r);
    }
    assert_eq!(by_criterion.len(), 9);
    for (n, parts) in &by_criterion {
        let ok = parts.iter().all(|r| r.passed);
        let names: Vec<&str> = parts.iter().map(|r| r.name.as_str()).collect();
        let detail = if parts.len() > 1 {
            let sub: Vec<String> = parts
                .iter()
                .map(|r| format!("{} {}", r.id, if r.passed { "PASS" } else { "FAIL" }))
                .collect();
            format!(" ({})", sub.join(", "))
        } else {
            String::new()
        };
        println!(
            "criterion {n}: {}{} - {} [{:.1} s]",
            if ok { "PASS" } else { "FAIL" },
            detail,
            names.join("; "),
            elapsed[n].as_secs_f64()
        );
    }
    for r in &reports {
        if KNOWN_UNATTAINABLE.contains(&r.id.as_str()) {
            assert!(!r.passed, "{} now passes; revisit the analysis", r.id);
        } else {
            assert!(r.passed, "{}", r.summary_line());
        }
    }
    println!(
        "acceptance: ok ({} of 9 criteria pass; known unattainable: {})",
        by_criterion.values().filter(|p| p.iter().all(|r| r.passed)).count(),
        KNOWN_UNATTAINABLE.join(", ")
    );
}
