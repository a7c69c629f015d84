//! Synthetic oracle suites: full-budget equivalence with least squares,
//! sparse support recovery against exhaustive search, and the eviction rule
//! on constructed states (plus a sign-flipped negative control).
//!
//! cargo run --release --example oracle_check

use vtrust::pipeline::{oracle_report, RunConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let r = oracle_report(&RunConfig::synthetic(100, 2, 0.5))?;
    println!("full budget: residual gap {:.2e} in {:.2} ms", r.degenerate.max_residual_gap, r.degenerate.elapsed_ms);
    for c in &r.recovery.cases {
        println!(
            "seed {}: exhaustive {:?}, online {:?}{}, omp {:?}{}",
            c.seed,
            c.brute_force,
            c.online,
            if c.online_matches { "" } else { " (miss)" },
            c.omp,
            if c.omp_matches { "" } else { " (miss)" },
        );
    }
    println!("eviction rule: {}/{} mismatches", r.theorem.mismatches, r.theorem.states);
    println!("negative control: {}/{} mismatches", r.negative_control.mismatches, r.negative_control.states);
    Ok(())
}
