//! Second-order step features against the exact per-point loss decrease for
//! a linear model, across step sizes.
//!
//! cargo run --example taylor_valuation

use vtrust::synth::{gen_biased_classification, BiasedClassificationSpec};
use vtrust::trainkit::{sgd_step, GradientBundle, ModelSpec, ModelState};
use vtrust::valuation::{incremental_value_exact, taylor_feature};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let (train, val) = gen_biased_classification(&BiasedClassificationSpec::new(100, 3, 0.5, 1))?;
    let spec = ModelSpec::linear(train.dim());
    let model = ModelState::init(spec, 3)?;
    let point = &train.rows[0];
    let bundle = GradientBundle::compute(&model, point, &val);
    for eta in [1e-1, 1e-2, 1e-3] {
        let exact = incremental_value_exact(&model, &sgd_step(&model, point, eta), &val)?.values;
        let approx: Vec<f64> = taylor_feature(&bundle, eta).iter().map(|v| eta * v).collect();
        let err = exact.iter().zip(&approx).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        println!("eta {eta:.0e}: max |exact - eta * feature| = {err:.3e}");
    }
    Ok(())
}
