//! A hand-built full buffer where the replacement conditions hold: the
//! incoming column dominates every non-optimal entry's projection and those
//! entries carry negative coefficients, so the rule predicts which one goes.
//!
//! cargo run --example eviction_rule

use std::collections::HashSet;

use vtrust::select::{check_eviction_rule, ColumnId, FeatureColumn, SelectionBuffer};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let col = |p: usize, v: [f64; 3]| FeatureColumn::normalized(ColumnId::new(1, p), &v);
    let buffer = SelectionBuffer::with_coefficients(
        3,
        3,
        [(col(0, [1.0, 0.0, 0.0])?, 0.8), (col(1, [0.0, 1.0, 0.0])?, -0.3), (col(2, [0.6, 0.8, 0.0])?, -0.6)],
    )?;
    let residual = [0.1, 0.2, 1.0];
    let candidate = col(3, [0.1, 0.1, 1.0])?;
    let optimal = HashSet::from([ColumnId::new(1, 0)]);
    let r = check_eviction_rule(&residual, &candidate, &buffer, &optimal)?;
    for e in &r.entries {
        println!("{e:?}");
    }
    println!("conditions hold: {}, predicted {:?}, actual {:?}", r.conditions_hold, r.predicted_eviction, r.actual);
    Ok(())
}
