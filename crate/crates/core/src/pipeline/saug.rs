use std::collections::BTreeMap;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::report::{run_id, write_json, SCHEMA_VERSION};
use super::{prepare_data, Result, RunConfig};
use crate::augment::{saug_loop, CorruptionMatrix, SaugRound, StopReason};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SaugReport {
    pub schema_version: u32,
    pub run_id: String,
    pub config: RunConfig,
    pub matrix: CorruptionMatrix,
    /// Round 0 is the clean-trained model.
    pub history: Vec<SaugRound>,
    pub stop: StopReason,
    pub final_train_size: usize,
    /// Row counts of the final dataset by origin (`clean` or `kind@severity`).
    pub manifest: BTreeMap<String, usize>,
    pub wall_ms: u64,
}

impl SaugReport {
    pub fn rounds_run(&self) -> usize {
        self.history.len() - 1
    }
}

pub fn saug_report(config: &RunConfig) -> Result<SaugReport> {
    let started = Instant::now();
    let data = prepare_data(config)?;
    let outcome =
        saug_loop(&data.train, &data.test, &config.corruptions, data.spec, &config.sgd.sgd(config.seed), &config.saug)?;
    let mut manifest = BTreeMap::new();
    for r in &outcome.dataset.rows {
        *manifest.entry(r.tag.clone().unwrap_or_else(|| "clean".into())).or_insert(0) += 1;
    }
    Ok(SaugReport {
        schema_version: SCHEMA_VERSION,
        run_id: run_id("saug", config),
        config: config.clone(),
        final_train_size: outcome.dataset.len(),
        matrix: outcome.matrix,
        history: outcome.history,
        stop: outcome.stop,
        manifest,
        wall_ms: started.elapsed().as_millis() as u64,
    })
}

/// Runs the augmentation loop and writes its report.
pub fn cmd_saug(config: &RunConfig) -> Result<SaugReport> {
    let report = saug_report(config)?;
    write_json(&config.out_dir.join(format!("{}.json", report.run_id)), &report)?;
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> RunConfig {
        let mut c = RunConfig::synthetic(100, 2, 0.5);
        c.sgd.epochs = 1;
        c
    }

    #[test]
    fn epsilon_one_records_one_round() {
        let mut c = small();
        c.saug.epsilon = 1.0;
        let r = saug_report(&c).unwrap();
        assert_eq!(r.rounds_run(), 1);
        assert_eq!(r.manifest.values().sum::<usize>(), r.final_train_size);
    }

    #[test]
    fn max_rounds_is_honored() {
        let mut c = small();
        c.saug.epsilon = 1e-9;
        c.saug.max_rounds = 2;
        let r = saug_report(&c).unwrap();
        assert!(r.rounds_run() <= 2);
    }
}
