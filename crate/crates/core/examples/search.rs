//! Pick a budget on a fraction grid, then bisect lambda for the smallest
//! weight on accuracy that still keeps the error rate under a bound.
//!
//! cargo run --release --example search

use vtrust::pipeline::{search_report, PipelineError, RunConfig, SearchConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut cfg = RunConfig::synthetic(300, 4, 0.8);
    cfg.sgd.epochs = 2;
    cfg.search = Some(SearchConfig {
        threshold: 0.2,
        target_metric: "er".into(),
        second_metric: None,
        fractions: vec![0.2, 0.4, 0.6],
    });
    match search_report(&cfg) {
        Ok(r) => {
            for g in &r.grid {
                println!("fraction {:.1}: {} {:.4}", g.fraction, r.target_metric, g.first);
            }
            for p in &r.probes {
                println!("  lambda {:.4}: {} {:.4} {}", p.lambda, r.target_metric, p.first, if p.feasible { "ok" } else { "over" });
            }
            println!(
                "chose fraction {} lambda {}: {} {:.4}, {} {:.4}",
                r.fraction, r.lambda, r.target_metric, r.first, r.second_metric, r.second
            );
        }
        Err(e @ PipelineError::ThresholdUnreachable { .. }) => println!("{e}"),
        Err(e) => return Err(e.into()),
    }
    Ok(())
}
