//! Sweep lambda and print the (error, disparity) Pareto frontier.
//!
//! cargo run --release --example sweep

use vtrust::pipeline::{sweep_report, RunConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut cfg = RunConfig::synthetic(400, 4, 0.8).with_fraction(0.3);
    cfg.sweep.lambdas = vec![0.0, 0.25, 0.5, 0.75, 1.0];
    let r = sweep_report(&cfg)?;
    for p in &r.points {
        let on = r.frontier.iter().any(|f| f.lambda == p.lambda);
        println!("lambda {:.2}: er {:.4}, eo_disp {:.4}{}", p.lambda, p.metric_x, p.metric_y, if on { "  *" } else { "" });
    }
    println!("{} of {} points on the frontier", r.frontier.len(), r.points.len());
    Ok(())
}
