//! Online selection against batch orthogonal matching pursuit on planted
//! sparse instances.
//!
//! cargo run --release --example sparse_recovery

use vtrust::select::{batch_omp, run_vtrust, ColumnId, EpochBatch, FeatureColumn};
use vtrust::synth::gen_sparse_instance;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    for seed in 0..5 {
        let inst = gen_sparse_instance(20, 30, 4, 0.0, 0.3, seed)?;
        let columns: Vec<FeatureColumn> =
            inst.columns.iter().enumerate().map(|(i, c)| FeatureColumn::raw(ColumnId::new(1, i), c.clone())).collect();
        let (buffer, trace) = run_vtrust(&[EpochBatch { epoch: 1, target: inst.target.clone(), columns: columns.clone() }], 4)?;
        let mut online: Vec<usize> = buffer.entries().iter().map(|e| e.id.datapoint).collect();
        online.sort_unstable();
        let mut omp = batch_omp(&columns, &inst.target, 4)?.support;
        omp.sort_unstable();
        println!(
            "seed {seed}: planted {:?}, online {online:?} (residual {:.3}, {} swaps), omp {omp:?}",
            inst.true_support,
            trace.summary().final_residual_norm,
            trace.summary().replaced,
        );
    }
    Ok(())
}
