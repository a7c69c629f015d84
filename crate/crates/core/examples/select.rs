//! Select half of a synthetic biased training set with the accuracy/fairness
//! pairing, retrain on the subset and compare with training on everything.
//!
//! cargo run --release --example select

use vtrust::pipeline::{select_report, RunConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let base = RunConfig::synthetic(600, 4, 0.8);
    for (label, cfg) in [("full", base.with_fraction(1.0)), ("half", base.with_fraction(0.5).with_lambda(0.5))] {
        let r = select_report(&cfg)?;
        println!(
            "{label:>4}: {:>3}/{} rows, replacements {:>3}, er {:.4}, eo_disp {:.4}, dp_disp {:.4}",
            r.subset.len(),
            r.n_train,
            r.trace.replaced,
            r.metrics.er,
            r.metrics.eo_disp.unwrap_or(f64::NAN),
            r.metrics.dp_disp.unwrap_or(f64::NAN),
        );
    }
    Ok(())
}
