use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{Example, LabeledDataset, Result, TrainError};

/// Probability clamp for the cross-entropy loss.
pub const PROB_CLAMP: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ModelKind {
    /// Raw affine score.
    Linear,
    /// Sigmoid of an affine score.
    Logistic,
    /// One tanh hidden layer; sigmoid output under cross-entropy, raw otherwise.
    Mlp { hidden: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LossKind {
    HalfSquared,
    CrossEntropy,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub kind: ModelKind,
    pub input_dim: usize,
    pub loss: LossKind,
    /// Intercept term for linear and logistic models. The MLP always has biases.
    #[serde(default = "default_true")]
    pub bias: bool,
}

fn default_true() -> bool {
    true
}

impl ModelSpec {
    pub fn linear(input_dim: usize) -> Self {
        Self { kind: ModelKind::Linear, input_dim, loss: LossKind::HalfSquared, bias: true }
    }

    pub fn logistic(input_dim: usize) -> Self {
        Self { kind: ModelKind::Logistic, input_dim, loss: LossKind::CrossEntropy, bias: true }
    }

    pub fn mlp(input_dim: usize, hidden: usize) -> Self {
        Self { kind: ModelKind::Mlp { hidden }, input_dim, loss: LossKind::CrossEntropy, bias: true }
    }

    pub fn without_bias(mut self) -> Self {
        self.bias = false;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.input_dim == 0 {
            return Err(TrainError::InvalidSpec("input_dim must be at least 1".into()));
        }
        if let ModelKind::Mlp { hidden: 0 } = self.kind {
            return Err(TrainError::InvalidSpec("MLP hidden width must be at least 1".into()));
        }
        if self.kind == ModelKind::Linear && self.loss == LossKind::CrossEntropy {
            return Err(TrainError::InvalidSpec("cross-entropy needs a probability output (logistic or mlp)".into()));
        }
        Ok(())
    }

    pub fn param_count(&self) -> usize {
        match self.kind {
            ModelKind::Linear | ModelKind::Logistic => self.input_dim + usize::from(self.bias),
            ModelKind::Mlp { hidden } => hidden * self.input_dim + 2 * hidden + 1,
        }
    }

    fn probability_output(&self) -> bool {
        match self.kind {
            ModelKind::Linear => false,
            ModelKind::Logistic => true,
            ModelKind::Mlp { .. } => self.loss == LossKind::CrossEntropy,
        }
    }
}

/// Flat parameter vector plus the spec that gives it shape.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelState {
    pub params: Vec<f64>,
    pub spec: ModelSpec,
}

pub(crate) fn sigmoid(s: f64) -> f64 {
    if s >= 0.0 {
        1.0 / (1.0 + (-s).exp())
    } else {
        let e = s.exp();
        e / (1.0 + e)
    }
}

impl ModelState {
    /// Zeros for linear/logistic, seeded uniform(-0.1, 0.1) for the MLP.
    pub fn init(spec: ModelSpec, seed: u64) -> Result<Self> {
        spec.validate()?;
        let n = spec.param_count();
        let params = match spec.kind {
            ModelKind::Mlp { .. } => {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                (0..n).map(|_| rng.random_range(-0.1..0.1)).collect()
            }
            _ => vec![0.0; n],
        };
        Ok(Self { params, spec })
    }

    pub fn from_params(spec: ModelSpec, params: Vec<f64>) -> Result<Self> {
        spec.validate()?;
        if params.len() != spec.param_count() {
            return Err(TrainError::DimensionMismatch { expected: spec.param_count(), got: params.len() });
        }
        Ok(Self { params, spec })
    }

    fn check_input(&self, x: &[f64]) {
        assert_eq!(x.len(), self.spec.input_dim, "input has {} features, model expects {}", x.len(), self.spec.input_dim);
    }

    /// Hidden activations (MLP only).
    fn hidden(&self, x: &[f64], hidden: usize) -> Vec<f64> {
        let d = self.spec.input_dim;
        let (w1, rest) = self.params.split_at(hidden * d);
        let b1 = &rest[..hidden];
        (0..hidden)
            .map(|j| {
                let row = &w1[j * d..(j + 1) * d];
                (row.iter().zip(x).map(|(w, v)| w * v).sum::<f64>() + b1[j]).tanh()
            })
            .collect()
    }

    fn score(&self, x: &[f64]) -> f64 {
        self.check_input(x);
        match self.spec.kind {
            ModelKind::Linear | ModelKind::Logistic => {
                let d = self.spec.input_dim;
                let s: f64 = self.params[..d].iter().zip(x).map(|(w, v)| w * v).sum();
                if self.spec.bias {
                    s + self.params[d]
                } else {
                    s
                }
            }
            ModelKind::Mlp { hidden } => {
                let h = self.hidden(x, hidden);
                let off = hidden * self.spec.input_dim + hidden;
                let w2 = &self.params[off..off + hidden];
                h.iter().zip(w2).map(|(a, w)| a * w).sum::<f64>() + self.params[off + hidden]
            }
        }
    }

    /// Probability of class 1, or the raw score for regression-style outputs.
    pub fn output(&self, x: &[f64]) -> f64 {
        let s = self.score(x);
        if self.spec.probability_output() {
            sigmoid(s)
        } else {
            s
        }
    }

    /// Thresholded prediction at 0.5.
    pub fn predict_class(&self, x: &[f64]) -> u8 {
        u8::from(self.output(x) >= 0.5)
    }

    /// Model confidence on `label`: the predicted probability of that class,
    /// with raw scores clamped to [0, 1].
    pub fn confidence(&self, x: &[f64], label: f64) -> f64 {
        let p = self.output(x).clamp(0.0, 1.0);
        if label >= 0.5 {
            p
        } else {
            1.0 - p
        }
    }

    /// Penultimate-layer features for the MLP, the raw input otherwise.
    pub fn embedding(&self, x: &[f64]) -> Vec<f64> {
        self.check_input(x);
        match self.spec.kind {
            ModelKind::Mlp { hidden } => self.hidden(x, hidden),
            _ => x.to_vec(),
        }
    }

    pub fn param_count(&self) -> usize {
        self.params.len()
    }
}

/// Loss of one example.
pub fn point_loss(model: &ModelState, ex: &Example) -> f64 {
    let out = model.output(&ex.features);
    match model.spec.loss {
        LossKind::HalfSquared => 0.5 * (out - ex.label).powi(2),
        LossKind::CrossEntropy => {
            let p = out.clamp(PROB_CLAMP, 1.0 - PROB_CLAMP);
            -(ex.label * p.ln() + (1.0 - ex.label) * (1.0 - p).ln())
        }
    }
}

/// Analytic gradient of the loss of one example.
pub fn point_grad(model: &ModelState, ex: &Example) -> Vec<f64> {
    let spec = &model.spec;
    let x = &ex.features;
    let s = model.score(x);
    let y = ex.label;
    let dscore = if spec.probability_output() {
        let p = sigmoid(s);
        match spec.loss {
            LossKind::CrossEntropy => p - y,
            LossKind::HalfSquared => (p - y) * p * (1.0 - p),
        }
    } else {
        s - y
    };
    let mut g = vec![0.0; model.params.len()];
    match spec.kind {
        ModelKind::Linear | ModelKind::Logistic => {
            let d = spec.input_dim;
            for (gi, xi) in g[..d].iter_mut().zip(x) {
                *gi = dscore * xi;
            }
            if spec.bias {
                g[d] = dscore;
            }
        }
        ModelKind::Mlp { hidden } => {
            let d = spec.input_dim;
            let h = model.hidden(x, hidden);
            let off_b1 = hidden * d;
            let off_w2 = off_b1 + hidden;
            let off_b2 = off_w2 + hidden;
            for j in 0..hidden {
                let w2 = model.params[off_w2 + j];
                g[off_w2 + j] = dscore * h[j];
                let dpre = dscore * w2 * (1.0 - h[j] * h[j]);
                g[off_b1 + j] = dpre;
                for (k, xk) in x.iter().enumerate() {
                    g[j * d + k] = dpre * xk;
                }
            }
            g[off_b2] = dscore;
        }
    }
    g
}

/// Per-row losses.
pub fn point_losses(model: &ModelState, data: &LabeledDataset) -> Vec<f64> {
    data.rows.iter().map(|r| point_loss(model, r)).collect()
}

/// Mean loss over `data`.
pub fn loss(model: &ModelState, data: &LabeledDataset) -> Result<f64> {
    if data.is_empty() {
        return Err(TrainError::EmptySubset);
    }
    Ok(point_losses(model, data).iter().sum::<f64>() / data.len() as f64)
}

/// Gradient of the mean loss over `data`.
pub fn grad(model: &ModelState, data: &LabeledDataset) -> Result<Vec<f64>> {
    if data.is_empty() {
        return Err(TrainError::EmptySubset);
    }
    let mut acc = vec![0.0; model.params.len()];
    for r in &data.rows {
        for (a, g) in acc.iter_mut().zip(point_grad(model, r)) {
            *a += g;
        }
    }
    let n = data.len() as f64;
    acc.iter_mut().for_each(|a| *a /= n);
    Ok(acc)
}

/// Mean loss over the rows with class `y` and sensitive attribute `z`.
pub fn group_loss(model: &ModelState, data: &LabeledDataset, y: u8, z: u8) -> Result<f64> {
    let idx = data.group_indices(y, z);
    if idx.is_empty() {
        return Err(TrainError::EmptyGroup { y, z });
    }
    Ok(idx.iter().map(|&i| point_loss(model, &data.rows[i])).sum::<f64>() / idx.len() as f64)
}

/// `theta - eta * grad(theta, example)`
pub fn sgd_step(model: &ModelState, ex: &Example, eta: f64) -> ModelState {
    let g = point_grad(model, ex);
    let params = model.params.iter().zip(&g).map(|(p, gi)| p - eta * gi).collect();
    ModelState { params, spec: model.spec }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn one(x: f64, y: f64) -> Example {
        Example::new(vec![x], y)
    }

    #[test]
    fn loss_examples() {
        let spec = ModelSpec::linear(1).without_bias();
        let zero = ModelState::from_params(spec, vec![0.0]).unwrap();
        assert_eq!(point_loss(&zero, &one(1.0, 0.0)), 0.0);
        let unit = ModelState::from_params(spec, vec![1.0]).unwrap();
        assert_eq!(point_loss(&unit, &one(2.0, 0.0)), 2.0);
        let logit = ModelState::init(ModelSpec::logistic(3), 0).unwrap();
        let ex = Example::new(vec![0.3, -2.0, 5.0], 1.0);
        assert!((point_loss(&logit, &ex) - std::f64::consts::LN_2).abs() < 1e-15);
    }

    #[test]
    fn grad_examples() {
        let spec = ModelSpec::linear(1).without_bias();
        let zero = ModelState::from_params(spec, vec![0.0]).unwrap();
        assert_eq!(point_grad(&zero, &one(1.0, 1.0)), vec![-1.0]);
        let opt = ModelState::from_params(spec, vec![2.0]).unwrap();
        assert_eq!(point_grad(&opt, &one(1.5, 3.0)), vec![0.0]);
    }

    #[test]
    fn sgd_step_examples() {
        let spec = ModelSpec::linear(1).without_bias();
        let zero = ModelState::from_params(spec, vec![0.0]).unwrap();
        let next = sgd_step(&zero, &one(1.0, 1.0), 0.1);
        assert!((next.params[0] - 0.1).abs() < 1e-15);
        let at_min = ModelState::from_params(spec, vec![1.0]).unwrap();
        assert_eq!(sgd_step(&at_min, &one(1.0, 1.0), 0.1).params, vec![1.0]);
    }

    #[test]
    fn empty_and_group_errors() {
        let m = ModelState::init(ModelSpec::logistic(1), 0).unwrap();
        let empty = LabeledDataset::default();
        assert_eq!(loss(&m, &empty), Err(TrainError::EmptySubset));
        assert_eq!(grad(&m, &empty), Err(TrainError::EmptySubset));
        let d = LabeledDataset::new(vec![one(1.0, 1.0).with_sensitive(0)]);
        assert_eq!(group_loss(&m, &d, 0, 1), Err(TrainError::EmptyGroup { y: 0, z: 1 }));
        assert_eq!(group_loss(&m, &d, 1, 0).unwrap(), loss(&m, &d).unwrap());
    }

    #[test]
    fn spec_validation() {
        assert!(ModelSpec::mlp(2, 0).validate().is_err());
        let bad = ModelSpec { loss: LossKind::CrossEntropy, ..ModelSpec::linear(2) };
        assert!(bad.validate().is_err());
        assert_eq!(ModelSpec::mlp(3, 4).param_count(), 4 * 3 + 4 + 4 + 1);
    }

    #[test]
    fn mlp_init_is_seeded_and_bounded() {
        let a = ModelState::init(ModelSpec::mlp(3, 5), 7).unwrap();
        let b = ModelState::init(ModelSpec::mlp(3, 5), 7).unwrap();
        assert_eq!(a, b);
        assert!(a.params.iter().all(|p| p.abs() < 0.1));
        assert_eq!(a.embedding(&[0.1, 0.2, 0.3]).len(), 5);
    }
}
