use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::model::{point_grad, sgd_step, ModelSpec, ModelState};
use super::{LabeledDataset, Result, TrainError};

pub type HookResult = std::result::Result<(), Box<dyn std::error::Error + Send + Sync>>;

/// Step size per epoch.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum LearningRate {
    Constant(f64),
    /// `eta0 / (1 + decay * (epoch - 1))`
    InverseDecay { eta0: f64, decay: f64 },
}

impl LearningRate {
    pub fn at_epoch(&self, epoch: u32) -> f64 {
        match *self {
            LearningRate::Constant(eta) => eta,
            LearningRate::InverseDecay { eta0, decay } => eta0 / (1.0 + decay * f64::from(epoch.saturating_sub(1))),
        }
    }

    fn validate(&self) -> Result<()> {
        let ok = match *self {
            LearningRate::Constant(eta) => eta > 0.0 && eta.is_finite(),
            LearningRate::InverseDecay { eta0, decay } => eta0 > 0.0 && eta0.is_finite() && decay >= 0.0,
        };
        if ok {
            Ok(())
        } else {
            Err(TrainError::InvalidLearningRate(format!("{self:?}")))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SgdConfig {
    pub learning_rate: LearningRate,
    pub epochs: u32,
    #[serde(default)]
    pub seed: u64,
    /// Reshuffle the visiting order each epoch; off keeps the natural order.
    #[serde(default)]
    pub shuffle: bool,
}

impl SgdConfig {
    pub fn new(eta: f64, epochs: u32) -> Self {
        Self { learning_rate: LearningRate::Constant(eta), epochs, seed: 0, shuffle: false }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }
}

/// Gradients at the pre-update parameters of one SGD step.
#[derive(Debug, Clone, PartialEq)]
pub struct GradientBundle {
    /// Gradient of the training point's loss.
    pub train_gradient: Vec<f64>,
    /// One row per probe (validation) point.
    pub val_gradients: Vec<Vec<f64>>,
}

impl GradientBundle {
    pub fn compute(model: &ModelState, point: &super::Example, probe: &LabeledDataset) -> Self {
        Self {
            train_gradient: point_grad(model, point),
            val_gradients: probe.rows.iter().map(|r| point_grad(model, r)).collect(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepInfo {
    /// 1-based epoch.
    pub epoch: u32,
    /// Index of the training row.
    pub datapoint: usize,
    /// Position within the epoch's visiting order.
    pub position: usize,
    pub eta: f64,
}

/// Observer of a training run. All methods default to no-ops.
pub trait TrainingHook {
    /// Whether `before_step` should receive a gradient bundle.
    fn wants_gradients(&self) -> bool {
        false
    }

    fn before_step(&mut self, _step: &StepInfo, _bundle: Option<&GradientBundle>, _before: &ModelState) -> HookResult {
        Ok(())
    }

    fn after_step(&mut self, _step: &StepInfo, _after: &ModelState) -> HookResult {
        Ok(())
    }

    fn end_epoch(&mut self, _epoch: u32, _model: &ModelState) -> HookResult {
        Ok(())
    }
}

/// Hook that observes nothing.
pub struct NoHook;

impl TrainingHook for NoHook {}

/// Per-point SGD for `config.epochs` epochs starting from the seeded
/// initialization. Hooks see every `(epoch, datapoint)` exactly once, in
/// visiting order. `probe` is the set the gradient bundle is computed over.
pub fn train_full(
    train: &LabeledDataset,
    probe: Option<&LabeledDataset>,
    spec: ModelSpec,
    config: &SgdConfig,
    hook: &mut dyn TrainingHook,
) -> Result<ModelState> {
    config.learning_rate.validate()?;
    if train.is_empty() {
        return Err(TrainError::EmptySubset);
    }
    for data in std::iter::once(train).chain(probe) {
        if !data.has_uniform_dim() || data.dim() != spec.input_dim {
            return Err(TrainError::DimensionMismatch { expected: spec.input_dim, got: data.dim() });
        }
    }
    let mut model = ModelState::init(spec, config.seed)?;
    let empty = LabeledDataset::default();
    let probe = probe.unwrap_or(&empty);
    let mut order: Vec<usize> = (0..train.len()).collect();
    for epoch in 1..=config.epochs {
        if config.shuffle {
            let mut rng = ChaCha8Rng::seed_from_u64(config.seed ^ (u64::from(epoch) << 32));
            order.shuffle(&mut rng);
        }
        let eta = config.learning_rate.at_epoch(epoch);
        for (position, &i) in order.iter().enumerate() {
            let step = StepInfo { epoch, datapoint: i, position, eta };
            let point = &train.rows[i];
            let bundle = hook.wants_gradients().then(|| GradientBundle::compute(&model, point, probe));
            hook.before_step(&step, bundle.as_ref(), &model).map_err(TrainError::Hook)?;
            model = sgd_step(&model, point, eta);
            hook.after_step(&step, &model).map_err(TrainError::Hook)?;
        }
        hook.end_epoch(epoch, &model).map_err(TrainError::Hook)?;
    }
    Ok(model)
}

/// Retrains from scratch on the rows at `indices`.
pub fn train_on_subset(dataset: &LabeledDataset, indices: &[usize], spec: ModelSpec, config: &SgdConfig) -> Result<ModelState> {
    if indices.is_empty() {
        return Err(TrainError::EmptySubset);
    }
    if let Some(&bad) = indices.iter().find(|&&i| i >= dataset.len()) {
        return Err(TrainError::IndexOutOfRange { index: bad, len: dataset.len() });
    }
    train_full(&dataset.subset(indices), None, spec, config, &mut NoHook)
}
