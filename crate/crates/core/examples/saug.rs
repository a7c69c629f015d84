//! Sampled augmentation: train, measure how each corruption hurts, add
//! corrupted copies in proportion to the damage, repeat until robust
//! accuracy stops improving.
//!
//! cargo run --release --example saug

use vtrust::pipeline::{saug_report, RunConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut cfg = RunConfig::synthetic(500, 4, 0.5);
    cfg.saug.max_rounds = 4;
    let r = saug_report(&cfg)?;
    for (j, c) in cfg.corruptions.iter().enumerate() {
        println!("{:?}@{}: self-trained {:.3}, cross mean {:.3}", c.kind, c.severity, r.matrix.self_trained(j), r.matrix.cross_mean(j));
    }
    for h in &r.history {
        println!("{h:?}");
    }
    println!("stopped: {:?}, {} rows: {:?}", r.stop, r.final_train_size, r.manifest);
    Ok(())
}
