//! Tabular corruption operators, label flipping, the robust-accuracy
//! matrix and the sampled-augmentation loop.

use std::fmt;

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::metrics::{accuracy, robust_accuracy, MetricsError};
use crate::trainkit::{train_full, Example, LabeledDataset, ModelSpec, ModelState, NoHook, SgdConfig, TrainError};

#[derive(Debug, Error, PartialEq)]
pub enum AugmentError {
    #[error("no corruption kinds given")]
    NoKinds,
    #[error("self-trained accuracy for corruption {0} is zero")]
    ZeroDiagonal(usize),
    #[error("every sampling number is zero; no augmentation helps")]
    AllZeroSn,
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error(transparent)]
    Train(#[from] TrainError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
}

pub type Result<T> = std::result::Result<T, AugmentError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CorruptionKind {
    /// Adds `N(0, severity^2)` to each feature.
    GaussianNoise,
    /// Zeroes each feature with probability `severity`.
    FeatureMask,
    /// Multiplies every feature by `1 + severity`.
    FeatureScale,
    /// Toggles binary labels; at dataset level `severity` is the flipped fraction.
    LabelFlip,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Corruption {
    pub kind: CorruptionKind,
    pub severity: f64,
}

impl Corruption {
    pub fn new(kind: CorruptionKind, severity: f64) -> Self {
        Self { kind, severity }
    }

    /// The four kinds at moderate severities.
    pub fn default_suite() -> Vec<Corruption> {
        vec![
            Corruption::new(CorruptionKind::GaussianNoise, 1.0),
            Corruption::new(CorruptionKind::FeatureMask, 0.5),
            Corruption::new(CorruptionKind::FeatureScale, 1.5),
            Corruption::new(CorruptionKind::LabelFlip, 0.1),
        ]
    }

    pub fn validate(&self) -> Result<()> {
        let ok = self.severity >= 0.0
            && self.severity.is_finite()
            && match self.kind {
                CorruptionKind::FeatureMask | CorruptionKind::LabelFlip => self.severity <= 1.0,
                _ => true,
            };
        if ok {
            Ok(())
        } else {
            Err(AugmentError::InvalidParameter(format!("severity {} for {:?}", self.severity, self.kind)))
        }
    }
}

impl fmt::Display for Corruption {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self.kind {
            CorruptionKind::GaussianNoise => "gaussian_noise",
            CorruptionKind::FeatureMask => "feature_mask",
            CorruptionKind::FeatureScale => "feature_scale",
            CorruptionKind::LabelFlip => "label_flip",
        };
        write!(f, "{name}@{}", self.severity)
    }
}

fn toggle(label: f64) -> f64 {
    if label >= 0.5 {
        0.0
    } else {
        1.0
    }
}

/// Corrupts one point. The feature at `protect` (the sensitive input) is
/// never touched.
pub fn apply_corruption(point: &Example, c: &Corruption, protect: Option<usize>, rng: &mut impl Rng) -> Example {
    let mut out = point.clone();
    out.tag = Some(c.to_string());
    let s = c.severity;
    for (i, v) in out.features.iter_mut().enumerate() {
        // draw for every coordinate so the stream does not depend on `protect`
        let change = match c.kind {
            CorruptionKind::GaussianNoise => Some(*v + s * rng.sample::<f64, _>(StandardNormal)),
            CorruptionKind::FeatureMask => (rng.random::<f64>() < s).then_some(0.0),
            CorruptionKind::FeatureScale => Some(*v * (1.0 + s)),
            CorruptionKind::LabelFlip => None,
        };
        if let Some(new) = change.filter(|_| Some(i) != protect && s > 0.0) {
            *v = new;
        }
    }
    if c.kind == CorruptionKind::LabelFlip {
        out.label = toggle(out.label);
    }
    out
}

/// Toggles the labels at `indices`.
pub fn flip_labels(data: &LabeledDataset, indices: &[usize]) -> LabeledDataset {
    let mut out = data.clone();
    for &i in indices {
        out.rows[i].label = toggle(out.rows[i].label);
    }
    out
}

/// Uniformly chosen `floor(fraction * n)` row indices.
pub fn label_flip_indices(n: usize, fraction: f64, rng: &mut impl Rng) -> Vec<usize> {
    let k = ((fraction.clamp(0.0, 1.0) * n as f64).floor() as usize).min(n);
    let mut idx = sample(rng, n, k).into_vec();
    idx.sort_unstable();
    idx
}

/// Toggles exactly `floor(fraction * n)` uniformly chosen labels.
pub fn label_flip_dataset(data: &LabeledDataset, fraction: f64, rng: &mut impl Rng) -> LabeledDataset {
    flip_labels(data, &label_flip_indices(data.len(), fraction, rng))
}

/// Corrupted copy of every row (label flips follow the dataset-level rule).
pub fn corrupt_dataset(data: &LabeledDataset, c: &Corruption, rng: &mut impl Rng) -> LabeledDataset {
    if c.kind == CorruptionKind::LabelFlip {
        let mut out = label_flip_dataset(data, c.severity, rng);
        for r in &mut out.rows {
            r.tag = Some(c.to_string());
        }
        return out;
    }
    data.with_rows(data.rows.iter().map(|r| apply_corruption(r, c, data.sensitive_feature, rng)).collect())
}

/// One corrupted test set per kind, each from its own derived seed.
pub fn corrupted_sets(data: &LabeledDataset, kinds: &[Corruption], seed: u64) -> Vec<LabeledDataset> {
    kinds
        .iter()
        .enumerate()
        .map(|(j, c)| corrupt_dataset(data, c, &mut ChaCha8Rng::seed_from_u64(seed ^ (0xC0FF_EE00 + j as u64))))
        .collect()
}

/// Robust accuracies: row 0 is the clean-trained model, row `j + 1` the
/// model trained with kind `j`; column `j` is the test set corrupted with kind `j`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorruptionMatrix {
    pub values: Vec<Vec<f64>>,
}

impl CorruptionMatrix {
    pub fn kinds(&self) -> usize {
        self.values.first().map_or(0, Vec::len)
    }

    /// Accuracy of the model trained with kind `j` on test set `j`.
    pub fn self_trained(&self, j: usize) -> f64 {
        self.values[j + 1][j]
    }

    /// Mean of column `j` over every row except the self-trained one.
    pub fn cross_mean(&self, j: usize) -> f64 {
        let others: Vec<f64> = (0..self.values.len()).filter(|&i| i != j + 1).map(|i| self.values[i][j]).collect();
        others.iter().sum::<f64>() / others.len() as f64
    }
}

/// Training data for kind `j`: the clean rows plus a corrupted copy.
fn augmented_with(train: &LabeledDataset, c: &Corruption, seed: u64) -> LabeledDataset {
    train.concat(&corrupt_dataset(train, c, &mut ChaCha8Rng::seed_from_u64(seed)))
}

/// Trains `|kinds| + 1` models and evaluates each on each corrupted test set.
pub fn build_corruption_matrix(
    train: &LabeledDataset,
    test: &LabeledDataset,
    kinds: &[Corruption],
    spec: ModelSpec,
    config: &SgdConfig,
) -> Result<CorruptionMatrix> {
    if kinds.is_empty() {
        return Err(AugmentError::NoKinds);
    }
    for c in kinds {
        c.validate()?;
    }
    let tests = corrupted_sets(test, kinds, config.seed);
    let mut models = vec![train_full(train, None, spec, config, &mut NoHook)?];
    for (j, c) in kinds.iter().enumerate() {
        let data = augmented_with(train, c, config.seed.wrapping_add(j as u64 + 1));
        models.push(train_full(&data, None, spec, config, &mut NoHook)?);
    }
    let values = models
        .iter()
        .map(|m| tests.iter().map(|t| accuracy(m, t)).collect::<std::result::Result<Vec<_>, _>>())
        .collect::<std::result::Result<Vec<_>, _>>()?;
    Ok(CorruptionMatrix { values })
}

/// Per-kind sampling numbers and the loop's history.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SamplingState {
    pub sn: Vec<f64>,
    pub round: usize,
    pub mean_ra_history: Vec<f64>,
}

impl SamplingState {
    /// Negative numbers clamped to zero, then normalized to sum to 1.
    pub fn fractions(&self) -> Result<Vec<f64>> {
        let clamped: Vec<f64> = self.sn.iter().map(|&s| s.max(0.0)).collect();
        let total: f64 = clamped.iter().sum();
        if !(total > 0.0) {
            return Err(AugmentError::AllZeroSn);
        }
        Ok(clamped.into_iter().map(|s| s / total).collect())
    }
}

/// `SN_j = (Mat[j,j] - mean_{i != j} Mat[i,j]) / Mat[j,j]`, with `Mat[j,j]`
/// the self-trained entry.
pub fn sampling_number_init(mat: &CorruptionMatrix) -> Result<SamplingState> {
    let k = mat.kinds();
    if k == 0 || mat.values.len() != k + 1 {
        return Err(AugmentError::InvalidParameter(format!(
            "matrix must be ({} + 1) x {k}, got {} rows",
            k,
            mat.values.len()
        )));
    }
    let mut sn = Vec::with_capacity(k);
    for j in 0..k {
        let diag = mat.self_trained(j);
        if diag == 0.0 {
            return Err(AugmentError::ZeroDiagonal(j));
        }
        sn.push((diag - mat.cross_mean(j)) / diag);
    }
    Ok(SamplingState { sn, round: 0, mean_ra_history: Vec::new() })
}

/// Appends, per kind `j`, `round(fraction_j * budget * n)` corrupted rows
/// drawn uniformly across classes.
pub fn sample_augmented_dataset(
    state: &SamplingState,
    data: &LabeledDataset,
    kinds: &[Corruption],
    budget: f64,
    rng: &mut impl Rng,
) -> Result<LabeledDataset> {
    if kinds.len() != state.sn.len() {
        return Err(AugmentError::InvalidParameter(format!("{} kinds for {} sampling numbers", kinds.len(), state.sn.len())));
    }
    let fractions = state.fractions()?;
    let by_class: Vec<Vec<usize>> = (0..2u8)
        .map(|y| (0..data.len()).filter(|&i| data.rows[i].class() == y).collect())
        .filter(|v: &Vec<usize>| !v.is_empty())
        .collect();
    let mut out = data.clone();
    for (c, f) in kinds.iter().zip(fractions) {
        let count = (f * budget * data.len() as f64).round() as usize;
        let drawn: Vec<usize> = class_uniform_draw(&by_class, count, rng);
        if c.kind == CorruptionKind::LabelFlip {
            // a flipped copy of every drawn point would just be label noise; flip its share
            let picked = data.subset(&drawn);
            let flipped = label_flip_dataset(&picked, c.severity, rng);
            out.rows.extend(flipped.rows.into_iter().map(|mut r| {
                r.tag = Some(c.to_string());
                r
            }));
        } else {
            out.rows.extend(drawn.iter().map(|&i| apply_corruption(&data.rows[i], c, data.sensitive_feature, rng)));
        }
    }
    Ok(out)
}

/// `count` indices split as evenly as possible across classes (within one),
/// without replacement while a class has rows left.
fn class_uniform_draw(by_class: &[Vec<usize>], count: usize, rng: &mut impl Rng) -> Vec<usize> {
    let c = by_class.len();
    let mut out = Vec::with_capacity(count);
    for (k, rows) in by_class.iter().enumerate() {
        let want = count / c + usize::from(k < count % c);
        let mut left = want;
        while left > 0 {
            let take = left.min(rows.len());
            out.extend(sample(rng, rows.len(), take).into_iter().map(|i| rows[i]));
            left -= take;
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SaugConfig {
    pub epsilon: f64,
    #[serde(default = "default_rounds")]
    pub max_rounds: usize,
    /// Augmented rows per round as a multiple of the clean size.
    #[serde(default = "default_budget")]
    pub budget: f64,
}

fn default_rounds() -> usize {
    10
}

fn default_budget() -> f64 {
    1.0
}

impl SaugConfig {
    pub fn new(epsilon: f64, max_rounds: usize) -> Self {
        Self { epsilon, max_rounds, budget: 1.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SaugRound {
    pub round: usize,
    /// Sampling numbers used to draw this round's data (empty for round 0).
    pub sn: Vec<f64>,
    pub ra: Vec<f64>,
    pub mean_ra: f64,
    pub sa: f64,
    pub train_size: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    Converged,
    MaxRounds,
    AllZeroSn,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SaugOutcome {
    pub dataset: LabeledDataset,
    pub model: ModelState,
    pub matrix: CorruptionMatrix,
    /// Round 0 is the clean-trained model.
    pub history: Vec<SaugRound>,
    pub stop: StopReason,
}

impl SaugOutcome {
    pub fn rounds_run(&self) -> usize {
        self.history.len() - 1
    }
}

/// Sample, retrain, measure per-kind RA, update `SN_j = Mat[j,j] - RA_j`;
/// stops once the mean RA gains less than `epsilon` over the previous round,
/// or after `max_rounds` rounds.
pub fn saug_loop(
    train: &LabeledDataset,
    test: &LabeledDataset,
    kinds: &[Corruption],
    spec: ModelSpec,
    config: &SgdConfig,
    saug: &SaugConfig,
) -> Result<SaugOutcome> {
    if !(saug.epsilon > 0.0) || saug.max_rounds == 0 || !(saug.budget > 0.0) {
        return Err(AugmentError::InvalidParameter(format!(
            "need epsilon > 0, max_rounds >= 1, budget > 0 (got {}, {}, {})",
            saug.epsilon, saug.max_rounds, saug.budget
        )));
    }
    let matrix = build_corruption_matrix(train, test, kinds, spec, config)?;
    let mut state = sampling_number_init(&matrix)?;
    let tests = corrupted_sets(test, kinds, config.seed);

    let clean = train_full(train, None, spec, config, &mut NoHook)?;
    let ra0: Vec<f64> = matrix.values[0].clone();
    let mean0 = ra0.iter().sum::<f64>() / ra0.len() as f64;
    state.mean_ra_history.push(mean0);
    let mut history =
        vec![SaugRound { round: 0, sn: vec![], ra: ra0, mean_ra: mean0, sa: accuracy(&clean, test)?, train_size: train.len() }];
    let mut dataset = train.clone();
    let mut model = clean;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed ^ 0x5A06);
    let mut stop = StopReason::MaxRounds;

    for round in 1..=saug.max_rounds {
        let next = match sample_augmented_dataset(&state, train, kinds, saug.budget, &mut rng) {
            Ok(d) => d,
            Err(AugmentError::AllZeroSn) => {
                stop = StopReason::AllZeroSn;
                break;
            }
            Err(e) => return Err(e),
        };
        let m = train_full(&next, None, spec, config, &mut NoHook)?;
        let ra: Vec<f64> = tests.iter().map(|t| accuracy(&m, t)).collect::<std::result::Result<_, _>>()?;
        let mean = robust_accuracy(&m, &tests)?;
        let prev = *state.mean_ra_history.last().expect("round 0 recorded");
        history.push(SaugRound { round, sn: state.sn.clone(), ra: ra.clone(), mean_ra: mean, sa: accuracy(&m, test)?, train_size: next.len() });
        state.mean_ra_history.push(mean);
        state.round = round;
        dataset = next;
        model = m;
        if mean - prev < saug.epsilon {
            stop = StopReason::Converged;
            break;
        }
        state.sn = (0..kinds.len()).map(|j| matrix.self_trained(j) - ra[j]).collect();
    }
    Ok(SaugOutcome { dataset, model, matrix, history, stop })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rng() -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(11)
    }

    fn point() -> Example {
        Example::new(vec![0.5, -1.0, 1.0], 1.0).with_sensitive(1)
    }

    #[test]
    fn zero_severity_is_identity() {
        for kind in [CorruptionKind::GaussianNoise, CorruptionKind::FeatureMask, CorruptionKind::FeatureScale] {
            let out = apply_corruption(&point(), &Corruption::new(kind, 0.0), None, &mut rng());
            assert_eq!(out.features, point().features);
            assert_eq!(out.label, point().label);
        }
    }

    #[test]
    fn label_flip_toggles_and_keeps_features() {
        let out = apply_corruption(&point(), &Corruption::new(CorruptionKind::LabelFlip, 0.3), None, &mut rng());
        assert_eq!(out.label, 0.0);
        assert_eq!(out.features, point().features);
    }

    #[test]
    fn corruption_is_seeded_and_spares_sensitive_input() {
        let c = Corruption::new(CorruptionKind::GaussianNoise, 0.7);
        let a = apply_corruption(&point(), &c, Some(2), &mut rng());
        assert_eq!(a, apply_corruption(&point(), &c, Some(2), &mut rng()));
        assert_eq!(a.features[2], 1.0);
        assert_ne!(a.features[0], 0.5);
    }

    #[test]
    fn label_flip_counts() {
        let d = LabeledDataset::new((0..100).map(|i| Example::new(vec![i as f64], (i % 2) as f64)).collect());
        let diff = |o: &LabeledDataset| o.rows.iter().zip(&d.rows).filter(|(a, b)| a.label != b.label).count();
        assert_eq!(diff(&label_flip_dataset(&d, 0.0, &mut rng())), 0);
        assert_eq!(diff(&label_flip_dataset(&d, 1.0, &mut rng())), 100);
        assert_eq!(diff(&label_flip_dataset(&d, 0.1, &mut rng())), 10);
        let idx = label_flip_indices(100, 0.37, &mut rng());
        assert_eq!(flip_labels(&flip_labels(&d, &idx), &idx), d);
    }

    #[test]
    fn sampling_number_examples() {
        // diag 0.9, the two other rows average 0.8
        let m = CorruptionMatrix { values: vec![vec![0.8], vec![0.9]] };
        let s = sampling_number_init(&m).unwrap();
        assert!((s.sn[0] - 1.0 / 9.0).abs() < 1e-12);
        let flat = CorruptionMatrix { values: vec![vec![0.7, 0.7]; 3] };
        assert_eq!(sampling_number_init(&flat).unwrap().sn, vec![0.0, 0.0]);
        let zero = CorruptionMatrix { values: vec![vec![0.5, 0.5], vec![0.0, 0.5], vec![0.5, 0.5]] };
        assert_eq!(sampling_number_init(&zero).unwrap_err(), AugmentError::ZeroDiagonal(0));
    }

    #[test]
    fn fractions_clamp_and_normalize() {
        let s = SamplingState { sn: vec![0.2, 0.2], round: 0, mean_ra_history: vec![] };
        assert_eq!(s.fractions().unwrap(), vec![0.5, 0.5]);
        let neg = SamplingState { sn: vec![-0.3, 0.1], round: 0, mean_ra_history: vec![] };
        assert_eq!(neg.fractions().unwrap(), vec![0.0, 1.0]);
        let none = SamplingState { sn: vec![-0.1, 0.0], round: 0, mean_ra_history: vec![] };
        assert_eq!(none.fractions().unwrap_err(), AugmentError::AllZeroSn);
    }

    #[test]
    fn sampled_rows_are_class_balanced() {
        let d = LabeledDataset::new((0..40).map(|i| Example::new(vec![i as f64], f64::from(i < 10))).collect());
        let s = SamplingState { sn: vec![1.0], round: 0, mean_ra_history: vec![] };
        let kinds = [Corruption::new(CorruptionKind::FeatureScale, 0.5)];
        let out = sample_augmented_dataset(&s, &d, &kinds, 0.75, &mut rng()).unwrap();
        let added = &out.rows[40..];
        assert_eq!(added.len(), 30);
        let pos = added.iter().filter(|r| r.class() == 1).count();
        assert!(pos.abs_diff(added.len() - pos) <= 1);
        assert!(added.iter().all(|r| r.tag.as_deref() == Some("feature_scale@0.5")));
    }
}
