//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! `cargo test -p shortdesc-cli --test acceptance` runs everything; pass a
//! substring (`-- service`) to run only matching criteria.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::Instant;

/// Fail the criterion with a message unless `cond` holds.
macro_rules! check {
    ($cond:expr, $($fmt:tt)+) => {
        if !$cond {
            return Err(format!($($fmt)+));
        }
    };
}

mod analysis;
mod corpus;
mod experiment;
mod metric;
mod model;
mod service;

type Outcome = Result<String, String>;

const CRITERIA: &[(&str, fn() -> Outcome)] = &[
    ("fusion-oracle", model::fusion_oracle),
    ("gradient-checks", model::gradient_checks),
    ("ablation-invariance", model::ablation_invariance),
    ("end-to-end-synthetic", experiment::end_to_end),
    ("emd-oracle", metric::emd_oracle),
    ("bradley-terry-recovery", analysis::bradley_terry),
    ("propensity-suite", analysis::propensity),
    ("fleiss-kappa", analysis::fleiss),
    ("statistics-fidelity", corpus::statistics_fidelity),
    ("service-protocol", service::service_protocol),
];

fn main() {
    let filters: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    if std::env::args().any(|a| a == "--list") {
        for (name, _) in CRITERIA {
            println!("{name}: test");
        }
        return;
    }
    let selected: Vec<_> = CRITERIA
        .iter()
        .filter(|(name, _)| filters.is_empty() || filters.iter().any(|f| name.contains(f.as_str())))
        .collect();
    println!("\nrunning {} acceptance criteria", selected.len());
    let mut failed = 0;
    for (name, criterion) in selected {
        let start = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(criterion)).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(format!("panicked: {msg}"))
        });
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("PASS {name} ({secs:.1}s): {detail}"),
            Err(reason) => {
                failed += 1;
                println!("FAIL {name} ({secs:.1}s): {reason}");
            }
        }
    }
    if failed > 0 {
        println!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
    println!("all acceptance criteria passed\n");
}
