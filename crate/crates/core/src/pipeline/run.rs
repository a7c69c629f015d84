use std::collections::BTreeSet;
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::report::{run_id, write_json, RunReport, SelectedPoint, SCHEMA_VERSION};
use super::{DatasetSource, PipelineError, Result, RunConfig};
use crate::augment::corrupted_sets;
use crate::metrics::MetricReport;
use crate::select::{ColumnId, FeatureColumn, OnlineSelector, SolverTrace};
use crate::synth::{gen_biased_classification, load_csv, write_csv, TRAIN_SPLIT};
use crate::trainkit::{
    train_full, train_on_subset, GradientBundle, HookResult, LabeledDataset, ModelSpec, ModelState, StepInfo,
    TrainingHook,
};
use crate::valuation::{BlockKind, CumulativeTarget, StepValuer};

/// Seed offsets so the test data and corrupted sets never share a stream
/// with the training data.
const TEST_SEED: u64 = 0x7E57_0000;
const AUG_VAL_SEED: u64 = 0xA116_0000;

/// Train/validation/test splits plus the derived corrupted sets.
#[derive(Debug, Clone)]
pub struct PreparedData {
    pub train: LabeledDataset,
    pub validation: LabeledDataset,
    pub test: LabeledDataset,
    /// One corrupted copy of the test set per configured corruption.
    pub corrupted_test: Vec<LabeledDataset>,
    /// Corrupted validation copies, for robustness pairings.
    pub augmented_validation: Option<LabeledDataset>,
    pub spec: ModelSpec,
}

fn check_dims(sets: &[(&str, &LabeledDataset)]) -> Result<usize> {
    let d = sets[0].1.dim();
    for (name, s) in sets {
        if s.is_empty() {
            return Err(PipelineError::Data(format!("{name} set is empty")));
        }
        if !s.has_uniform_dim() || s.dim() != d {
            return Err(PipelineError::Data(format!("{name} set has {} features, expected {d}", s.dim())));
        }
    }
    Ok(d)
}

pub fn prepare_data(config: &RunConfig) -> Result<PreparedData> {
    config.validate()?;
    let (train, validation, test) = match &config.dataset {
        DatasetSource::Synthetic(s) => {
            let (train, validation) = gen_biased_classification(&s.spec(config.seed))?;
            let test_n = s.test_n.unwrap_or(s.n);
            let mut test_spec = s.spec(config.seed.wrapping_add(TEST_SEED));
            test_spec.n = test_n.max(2);
            let (a, b) = gen_biased_classification(&test_spec)?;
            (train, validation, a.concat(&b))
        }
        DatasetSource::Csv(c) => {
            let schema = c.schema();
            let full = load_csv(&c.train, &schema)?;
            let (train, validation) = match &c.validation {
                Some(p) => (full, load_csv(p, &schema)?),
                None => {
                    let mut idx: Vec<usize> = (0..full.len()).collect();
                    idx.shuffle(&mut ChaCha8Rng::seed_from_u64(config.seed));
                    let cut = ((full.len() as f64) * TRAIN_SPLIT).round() as usize;
                    (full.subset(&idx[..cut]), full.subset(&idx[cut..]))
                }
            };
            let test = match &c.test {
                Some(p) => load_csv(p, &schema)?,
                None => validation.clone(),
            };
            (train, validation, test)
        }
    };
    let dim = check_dims(&[("train", &train), ("validation", &validation), ("test", &test)])?;
    let corrupted_test = corrupted_sets(&test, &config.corruptions, config.seed.wrapping_add(TEST_SEED));
    let augmented_validation = config.pairing.uses(BlockKind::Robustness).then(|| {
        corrupted_sets(&validation, &config.corruptions, config.seed.wrapping_add(AUG_VAL_SEED))
            .iter()
            .fold(validation.with_rows(Vec::new()), |acc, s| acc.concat(s))
    });
    Ok(PreparedData { train, validation, test, corrupted_test, augmented_validation, spec: config.model_spec(dim) })
}

/// Values every SGD step and feeds the epoch's columns to the selector once
/// the epoch's cumulative target is known.
struct SelectionHook {
    valuer: StepValuer,
    selector: OnlineSelector,
    cumulative: CumulativeTarget,
    pending: Vec<FeatureColumn>,
    bundle: Option<GradientBundle>,
    before: Option<ModelState>,
}

impl TrainingHook for SelectionHook {
    fn wants_gradients(&self) -> bool {
        self.valuer.needs_gradients()
    }

    fn before_step(&mut self, _: &StepInfo, bundle: Option<&GradientBundle>, before: &ModelState) -> HookResult {
        self.bundle = bundle.cloned();
        self.before = Some(before.clone());
        Ok(())
    }

    fn after_step(&mut self, step: &StepInfo, after: &ModelState) -> HookResult {
        let before = self.before.take().expect("before_step ran");
        let value = self.valuer.evaluate(self.bundle.take().as_ref(), &before, after, step.eta)?;
        self.cumulative.add(&value.increment.with_source(step.epoch, step.datapoint))?;
        self.pending.push(FeatureColumn::raw(ColumnId::new(step.epoch, step.datapoint), value.feature));
        Ok(())
    }

    fn end_epoch(&mut self, _: u32, _: &ModelState) -> HookResult {
        self.selector.set_target(self.cumulative.values().to_vec())?;
        for col in self.pending.drain(..) {
            self.selector.step(col)?;
        }
        Ok(())
    }
}

/// Result of one streamed selection.
#[derive(Debug, Clone)]
pub struct Selection {
    pub omega: usize,
    pub selected: Vec<SelectedPoint>,
    /// Distinct datapoints, ascending. Every row when `omega >= N`.
    pub subset: Vec<usize>,
    pub trace: SolverTrace,
    /// Final cumulative value target.
    pub target: Vec<f64>,
    /// Model at the end of the full-data trajectory.
    pub full_model: ModelState,
}

/// Trains on the full data while streaming every step's feature column
/// through the online selector.
pub fn run_selection(config: &RunConfig, data: &PreparedData) -> Result<Selection> {
    let n = data.train.len();
    let omega = config.omega(n)?;
    let valuer = StepValuer::with_fairness_block(
        config.pairing,
        config.lambda,
        config.feature_mode,
        config.fairness_block,
        data.validation.clone(),
        data.augmented_validation.clone(),
    )?;
    let probe = valuer.probe_set().clone();
    let layout = valuer.layout().clone();
    let mut hook = SelectionHook {
        selector: OnlineSelector::new(omega, layout.dim())?,
        cumulative: CumulativeTarget::new(layout),
        valuer,
        pending: Vec::new(),
        bundle: None,
        before: None,
    };
    let sgd = config.sgd.sgd(config.seed);
    let full_model = train_full(&data.train, Some(&probe), data.spec, &sgd, &mut hook)?;
    let target = hook.cumulative.values().to_vec();
    let (buffer, trace) = hook.selector.into_parts();
    let selected: Vec<SelectedPoint> = buffer
        .entries()
        .iter()
        .map(|e| SelectedPoint { datapoint: e.id.datapoint, epoch: e.id.epoch, beta: e.coefficient })
        .collect();
    // A budget covering every row selects every row.
    let subset: Vec<usize> = if omega >= n {
        (0..n).collect()
    } else {
        selected.iter().map(|s| s.datapoint).collect::<BTreeSet<_>>().into_iter().collect()
    };
    Ok(Selection { omega, selected, subset, trace, target, full_model })
}

/// Selection, subset retrain and evaluation, without writing files.
pub fn select_report(config: &RunConfig) -> Result<RunReport> {
    let started = Instant::now();
    let data = prepare_data(config)?;
    let sel = run_selection(config, &data)?;
    let model = train_on_subset(&data.train, &sel.subset, data.spec, &config.sgd.sgd(config.seed))?;
    let metrics = MetricReport::evaluate(&model, &data.test, &data.corrupted_test, dataset_name(config), config.seed)?;
    Ok(RunReport {
        schema_version: SCHEMA_VERSION,
        run_id: run_id("select", config),
        config: config.clone(),
        n_train: data.train.len(),
        omega: sel.omega,
        selected: sel.selected,
        subset: sel.subset,
        trace: sel.trace.summary(),
        metrics,
        wall_ms: started.elapsed().as_millis() as u64,
    })
}

pub(crate) fn dataset_name(config: &RunConfig) -> String {
    match &config.dataset {
        DatasetSource::Synthetic(s) => format!("synthetic(n={},d={},bias={})", s.n, s.input_dim, s.bias_strength),
        DatasetSource::Csv(c) => c.train.display().to_string(),
    }
}

/// Runs the selection pipeline and writes `<run_id>.json` and `<run_id>.csv`.
pub fn cmd_select(config: &RunConfig) -> Result<RunReport> {
    let report = select_report(config)?;
    report.write()?;
    Ok(report)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatagenReport {
    pub schema_version: u32,
    pub run_id: String,
    pub config: RunConfig,
    pub files: Vec<String>,
    pub rows: Vec<usize>,
}

/// Writes the configured data splits as CSV (`train.csv`, `validation.csv`,
/// `test.csv`) plus a manifest.
pub fn cmd_datagen(config: &RunConfig) -> Result<DatagenReport> {
    let data = prepare_data(config)?;
    let mut files = Vec::new();
    let mut rows = Vec::new();
    for (name, set) in [("train", &data.train), ("validation", &data.validation), ("test", &data.test)] {
        let path = config.out_dir.join(format!("{name}.csv"));
        write_csv(&path, set)?;
        files.push(path.display().to_string());
        rows.push(set.len());
    }
    let report =
        DatagenReport { schema_version: SCHEMA_VERSION, run_id: run_id("datagen", config), config: config.clone(), files, rows };
    write_json(&config.out_dir.join(format!("{}.json", report.run_id)), &report)?;
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> RunConfig {
        let mut c = RunConfig::synthetic(150, 2, 0.8);
        c.sgd.epochs = 2;
        c
    }

    #[test]
    fn full_budget_matches_full_training() {
        let c = small().with_fraction(1.0);
        let r = select_report(&c).unwrap();
        assert_eq!(r.subset, (0..r.n_train).collect::<Vec<_>>());
        let data = prepare_data(&c).unwrap();
        let full = train_full(&data.train, None, data.spec, &c.sgd.sgd(c.seed), &mut crate::trainkit::NoHook).unwrap();
        let m = MetricReport::evaluate(&full, &data.test, &data.corrupted_test, dataset_name(&c), c.seed).unwrap();
        assert_eq!(r.metrics, m);
    }

    #[test]
    fn budget_bounds_the_selection() {
        let r = select_report(&small().with_fraction(0.2)).unwrap();
        assert_eq!(r.omega, 24);
        assert!(r.selected.len() <= 24 && r.subset.len() <= 24 && !r.subset.is_empty());
        assert_eq!(r.trace.steps, 2 * 120);
    }

    #[test]
    fn robustness_pairing_runs() {
        let mut c = small().with_fraction(0.3);
        c.pairing = crate::valuation::Pairing::AccuracyRobustness;
        c.lambda = 0.5;
        let r = select_report(&c).unwrap();
        assert!(r.metrics.ra.is_some());
    }

    #[test]
    fn invalid_lambda_is_a_config_error() {
        let e = select_report(&small().with_lambda(1.5)).unwrap_err();
        assert_eq!(e.exit_code(), 1);
    }
}
