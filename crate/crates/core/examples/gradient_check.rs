//! Analytic per-point gradients against central finite differences.
//!
//! cargo run --example gradient_check

use vtrust::trainkit::{point_grad, point_loss, Example, ModelSpec, ModelState};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let ex = Example::new(vec![0.3, -1.2, 0.8], 1.0);
    for spec in [ModelSpec::linear(3), ModelSpec::logistic(3), ModelSpec::mlp(3, 5)] {
        let model = ModelState::init(spec, 11)?;
        let g = point_grad(&model, &ex);
        let h = 1e-6;
        let mut worst: f64 = 0.0;
        for i in 0..model.params.len() {
            let mut p = model.params.clone();
            p[i] += h;
            let up = point_loss(&ModelState::from_params(spec, p.clone())?, &ex);
            p[i] -= 2.0 * h;
            let down = point_loss(&ModelState::from_params(spec, p)?, &ex);
            let fd = (up - down) / (2.0 * h);
            worst = worst.max((fd - g[i]).abs() / fd.abs().max(g[i].abs()).max(1e-8));
        }
        println!("{:?}: {} params, worst relative error {worst:.2e}", spec.kind, model.params.len());
    }
    Ok(())
}
