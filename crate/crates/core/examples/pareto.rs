//! Non-dominated points of a small (error, disparity) cloud.
//!
//! cargo run --example pareto

use vtrust::metrics::{pareto_frontier, ParetoPoint};

fn main() {
    let points = [
        ParetoPoint::new(0.0, 0.20, 0.02),
        ParetoPoint::new(0.3, 0.15, 0.05),
        ParetoPoint::new(0.5, 0.16, 0.06),
        ParetoPoint::new(0.7, 0.12, 0.09),
        ParetoPoint::new(1.0, 0.12, 0.12),
    ];
    for p in pareto_frontier(&points) {
        println!("lambda {:.1}: er {:.2}, eo_disp {:.2}", p.lambda, p.metric_x, p.metric_y);
    }
}
