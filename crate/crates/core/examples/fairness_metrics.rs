//! Test metrics of a logistic model trained on biased data.
//!
//! cargo run --release --example fairness_metrics

use vtrust::augment::{corrupted_sets, Corruption};
use vtrust::metrics::{cf_gap, distinctiveness, uncertainty, MetricReport};
use vtrust::synth::{gen_biased_classification, BiasedClassificationSpec};
use vtrust::trainkit::{train_full, ModelSpec, NoHook, SgdConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let (train, test) = gen_biased_classification(&BiasedClassificationSpec::new(800, 4, 0.8, 2))?;
    let spec = ModelSpec::logistic(train.dim());
    let mut sgd = SgdConfig::new(0.05, 3).with_seed(2);
    sgd.shuffle = true;
    let model = train_full(&train, None, spec, &sgd, &mut NoHook)?;
    let corrupted = corrupted_sets(&test, &Corruption::default_suite(), 2);
    let m = MetricReport::evaluate(&model, &test, &corrupted, "synthetic", 2)?;
    println!("{m:?}");

    let z = train.dim() - 1;
    let gaps: Vec<f64> = test.rows.iter().map(|r| cf_gap(&model, r, Some(z))).collect::<Result<_, _>>()?;
    println!("mean counterfactual gap {:.4}", gaps.iter().sum::<f64>() / gaps.len() as f64);
    println!("uncertainty of first test row {:.4}", uncertainty(&model, &test.rows[0]));
    println!("distinctiveness vs first 50 train rows {:.4}", distinctiveness(&model, &test.rows[0], &train.rows[..50])?);
    Ok(())
}
