//! Drive the selector column by column and print every decision.
//!
//! cargo run --example online_selector

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use vtrust::select::{ColumnId, FeatureColumn, OnlineSelector};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let dim = 6;
    let mut sel = OnlineSelector::new(3, dim)?;
    let target: Vec<f64> = (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect();
    sel.set_target(target)?;
    for p in 0..10 {
        let raw: Vec<f64> = (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect();
        let d = sel.step(FeatureColumn::normalized(ColumnId::new(1, p), &raw)?)?;
        let held: Vec<String> =
            sel.buffer().entries().iter().map(|e| format!("{}:{:+.2}", e.id.datapoint, e.coefficient)).collect();
        println!("point {p}: {:?} -> [{}]", d.outcome, held.join(" "));
    }
    let (_, trace) = sel.into_parts();
    println!("{:?}", trace.summary());
    Ok(())
}
