use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::augment::{Corruption, SaugConfig};
use crate::synth::{BiasedClassificationSpec, CsvSchema};
use crate::trainkit::{LearningRate, LossKind, ModelKind, ModelSpec, SgdConfig};
use crate::valuation::{BlockKind, FairnessBlock, FeatureMode, Pairing};

/// A config problem, addressed by its dotted field path.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError {
    pub field: String,
    pub message: String,
}

impl ConfigError {
    pub fn new(field: impl Into<String>, message: impl Into<String>) -> Self {
        Self { field: field.into(), message: message.into() }
    }
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.field, self.message)
    }
}

impl std::error::Error for ConfigError {}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DatasetSource {
    Synthetic(SyntheticSource),
    Csv(CsvSource),
}

/// Biased classification data drawn with the run seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SyntheticSource {
    /// Rows before the 80/20 train/validation split.
    pub n: usize,
    pub input_dim: usize,
    pub bias_strength: f64,
    #[serde(default = "half")]
    pub class_balance: f64,
    #[serde(default = "one")]
    pub separation: f64,
    /// Rows in the held-out test set; defaults to `n`.
    #[serde(default)]
    pub test_n: Option<usize>,
}

fn half() -> f64 {
    0.5
}

fn one() -> f64 {
    1.0
}

impl SyntheticSource {
    pub fn spec(&self, seed: u64) -> BiasedClassificationSpec {
        BiasedClassificationSpec {
            n: self.n,
            input_dim: self.input_dim,
            bias_strength: self.bias_strength,
            class_balance: self.class_balance,
            separation: self.separation,
            seed,
        }
    }
}

/// CSV files; relative paths resolve against the config file's directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CsvSource {
    pub train: PathBuf,
    /// Defaults to a seeded 80/20 split of `train`.
    #[serde(default)]
    pub validation: Option<PathBuf>,
    /// Defaults to the validation set.
    #[serde(default)]
    pub test: Option<PathBuf>,
    pub label: String,
    #[serde(default)]
    pub sensitive: Option<String>,
}

impl CsvSource {
    pub fn schema(&self) -> CsvSchema {
        CsvSchema { label: self.label.clone(), sensitive: self.sensitive.clone() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    #[serde(flatten)]
    pub kind: ModelKind,
    /// Defaults to half-squared for linear models, cross-entropy otherwise.
    #[serde(default)]
    pub loss: Option<LossKind>,
    #[serde(default = "yes")]
    pub bias: bool,
}

fn yes() -> bool {
    true
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self { kind: ModelKind::Logistic, loss: None, bias: true }
    }
}

impl ModelConfig {
    pub fn spec(&self, input_dim: usize) -> ModelSpec {
        let loss = self.loss.unwrap_or(match self.kind {
            ModelKind::Linear => LossKind::HalfSquared,
            _ => LossKind::CrossEntropy,
        });
        ModelSpec { kind: self.kind, input_dim, loss, bias: self.bias }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainConfig {
    #[serde(default = "default_lr")]
    pub learning_rate: LearningRate,
    #[serde(default = "default_epochs")]
    pub epochs: u32,
    #[serde(default = "yes")]
    pub shuffle: bool,
}

fn default_lr() -> LearningRate {
    LearningRate::Constant(0.05)
}

fn default_epochs() -> u32 {
    3
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self { learning_rate: default_lr(), epochs: default_epochs(), shuffle: true }
    }
}

impl TrainConfig {
    pub fn sgd(&self, seed: u64) -> SgdConfig {
        SgdConfig { learning_rate: self.learning_rate, epochs: self.epochs, seed, shuffle: self.shuffle }
    }
}

/// The lambda grid used when a sweep names none.
pub const DEFAULT_LAMBDAS: [f64; 7] = [0.0, 0.1, 0.3, 0.5, 0.7, 0.9, 1.0];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    #[serde(default = "default_lambdas")]
    pub lambdas: Vec<f64>,
}

fn default_lambdas() -> Vec<f64> {
    DEFAULT_LAMBDAS.to_vec()
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self { lambdas: default_lambdas() }
    }
}

/// Selection fractions tried by the budget grid search.
pub const DEFAULT_FRACTIONS: [f64; 9] = [0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9];

/// Metric names accepted by `search`. Lower is better for all but `sa` and `ra`.
pub const METRICS: [&str; 6] = ["er", "sa", "eo_disp", "dp_disp", "ra", "re"];

pub fn higher_is_better(metric: &str) -> bool {
    matches!(metric, "sa" | "ra")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SearchConfig {
    /// Bound the first metric must meet.
    pub threshold: f64,
    /// The first metric, which `threshold` applies to.
    pub target_metric: String,
    /// Metric reported (and improved) once the threshold holds; defaults to
    /// the disparity or robust error paired with the first block.
    #[serde(default)]
    pub second_metric: Option<String>,
    #[serde(default = "default_fractions")]
    pub fractions: Vec<f64>,
}

fn default_fractions() -> Vec<f64> {
    DEFAULT_FRACTIONS.to_vec()
}

impl SearchConfig {
    pub fn second(&self, pairing: Pairing) -> String {
        self.second_metric.clone().unwrap_or_else(|| default_second_metric(pairing).to_string())
    }
}

pub fn default_second_metric(pairing: Pairing) -> &'static str {
    match pairing.families().1 {
        Some(BlockKind::Fairness) | None => "eo_disp",
        Some(_) => "re",
    }
}

/// Sizes for the synthetic oracle suites.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OracleConfig {
    #[serde(default = "ten")]
    pub seeds: u64,
    #[serde(default = "twenty")]
    pub n: usize,
    #[serde(default = "thirty")]
    pub d: usize,
    #[serde(default = "four")]
    pub k: usize,
    #[serde(default = "cap")]
    pub coherence_cap: f64,
    #[serde(default = "two_hundred")]
    pub theorem_states: usize,
}

fn ten() -> u64 {
    10
}
fn twenty() -> usize {
    20
}
fn thirty() -> usize {
    30
}
fn four() -> usize {
    4
}
fn cap() -> f64 {
    0.3
}
fn two_hundred() -> usize {
    200
}

impl Default for OracleConfig {
    fn default() -> Self {
        Self { seeds: 10, n: 20, d: 30, k: 4, coherence_cap: 0.3, theorem_states: 200 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub dataset: DatasetSource,
    #[serde(default)]
    pub model: ModelConfig,
    #[serde(default)]
    pub sgd: TrainConfig,
    #[serde(default = "default_pairing")]
    pub pairing: Pairing,
    #[serde(default = "one")]
    pub lambda: f64,
    /// Selection budget as a fraction of the training set; `omega = floor(fraction * N)`.
    #[serde(default)]
    pub fraction: Option<f64>,
    /// Selection budget in datapoints (alternative to `fraction`).
    #[serde(default)]
    pub omega: Option<usize>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_out")]
    pub out_dir: PathBuf,
    #[serde(default)]
    pub feature_mode: FeatureMode,
    #[serde(default)]
    pub fairness_block: FairnessBlock,
    /// Corruptions for the augmented validation set and robust accuracy.
    #[serde(default = "Corruption::default_suite")]
    pub corruptions: Vec<Corruption>,
    #[serde(default)]
    pub sweep: SweepConfig,
    #[serde(default)]
    pub search: Option<SearchConfig>,
    #[serde(default = "default_saug")]
    pub saug: SaugConfig,
    #[serde(default)]
    pub oracle: OracleConfig,
}

fn default_pairing() -> Pairing {
    Pairing::AccuracyFairness
}

fn default_out() -> PathBuf {
    PathBuf::from("out")
}

fn default_saug() -> SaugConfig {
    SaugConfig::new(0.005, 10)
}

/// Command-line overrides, applied before validation.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub out_dir: Option<PathBuf>,
    pub lambda: Option<f64>,
    pub fraction: Option<f64>,
    pub pairing: Option<Pairing>,
}

impl RunConfig {
    /// Synthetic biased data with every other field at its default.
    pub fn synthetic(n: usize, input_dim: usize, bias_strength: f64) -> Self {
        Self {
            dataset: DatasetSource::Synthetic(SyntheticSource {
                n,
                input_dim,
                bias_strength,
                class_balance: 0.5,
                separation: 1.0,
                test_n: None,
            }),
            model: ModelConfig::default(),
            sgd: TrainConfig::default(),
            pairing: default_pairing(),
            lambda: 1.0,
            fraction: Some(0.5),
            omega: None,
            seed: 0,
            out_dir: default_out(),
            feature_mode: FeatureMode::default(),
            fairness_block: FairnessBlock::default(),
            corruptions: Corruption::default_suite(),
            sweep: SweepConfig::default(),
            search: None,
            saug: default_saug(),
            oracle: OracleConfig::default(),
        }
    }

    pub fn from_json(text: &str) -> Result<Self, ConfigError> {
        serde_json::from_str(text).map_err(|e| ConfigError::new(json_field(&e), e.to_string()))
    }

    /// Reads a config file; relative CSV paths are rebased onto its directory.
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ConfigError::new("--config", format!("cannot read {}: {e}", path.display())))?;
        let mut cfg = Self::from_json(&text)?;
        if let DatasetSource::Csv(csv) = &mut cfg.dataset {
            let base = path.parent().unwrap_or(Path::new(""));
            let rebase = |p: &mut PathBuf| {
                if p.is_relative() {
                    *p = base.join(&*p);
                }
            };
            rebase(&mut csv.train);
            csv.validation.as_mut().map(rebase);
            csv.test.as_mut().map(rebase);
        }
        Ok(cfg)
    }

    pub fn apply(&mut self, o: &Overrides) {
        if let Some(s) = o.seed {
            self.seed = s;
        }
        if let Some(d) = &o.out_dir {
            self.out_dir = d.clone();
        }
        if let Some(l) = o.lambda {
            self.lambda = l;
        }
        if let Some(f) = o.fraction {
            self.fraction = Some(f);
            self.omega = None;
        }
        if let Some(p) = o.pairing {
            self.pairing = p;
        }
    }

    pub fn with_lambda(&self, lambda: f64) -> Self {
        Self { lambda, ..self.clone() }
    }

    pub fn with_fraction(&self, fraction: f64) -> Self {
        Self { fraction: Some(fraction), omega: None, ..self.clone() }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let err = |f: &str, m: String| Err(ConfigError::new(f, m));
        match &self.dataset {
            DatasetSource::Synthetic(s) => {
                if s.n < 10 {
                    return err("dataset.synthetic.n", format!("must be >= 10, got {}", s.n));
                }
                if s.input_dim == 0 {
                    return err("dataset.synthetic.input_dim", "must be >= 1".into());
                }
                if !(0.0..=1.0).contains(&s.bias_strength) {
                    return err("dataset.synthetic.bias_strength", format!("must lie in [0, 1], got {}", s.bias_strength));
                }
                if !(s.class_balance > 0.0 && s.class_balance < 1.0) {
                    return err("dataset.synthetic.class_balance", format!("must lie in (0, 1), got {}", s.class_balance));
                }
                if !(s.separation >= 0.0 && s.separation.is_finite()) {
                    return err("dataset.synthetic.separation", format!("must be >= 0, got {}", s.separation));
                }
                if s.test_n == Some(0) {
                    return err("dataset.synthetic.test_n", "must be >= 1".into());
                }
            }
            DatasetSource::Csv(c) => {
                if c.label.is_empty() {
                    return err("dataset.csv.label", "must name a column".into());
                }
            }
        }
        if let ModelKind::Mlp { hidden: 0 } = self.model.kind {
            return err("model.hidden", "must be >= 1".into());
        }
        if self.model.kind == ModelKind::Linear && self.model.loss == Some(LossKind::CrossEntropy) {
            return err("model.loss", "cross_entropy needs a probability output (logistic or mlp)".into());
        }
        if self.sgd.epochs == 0 {
            return err("sgd.epochs", "must be >= 1".into());
        }
        let lr_ok = match self.sgd.learning_rate {
            LearningRate::Constant(e) => e > 0.0 && e.is_finite(),
            LearningRate::InverseDecay { eta0, decay } => eta0 > 0.0 && eta0.is_finite() && decay >= 0.0,
        };
        if !lr_ok {
            return err("sgd.learning_rate", format!("must be positive, got {:?}", self.sgd.learning_rate));
        }
        check_unit("lambda", self.lambda)?;
        match (self.fraction, self.omega) {
            (Some(_), Some(_)) => return err("fraction", "give either fraction or omega, not both".into()),
            (None, None) => return err("fraction", "a selection budget is required (fraction or omega)".into()),
            (Some(f), None) if !(f > 0.0 && f <= 1.0) => {
                return err("fraction", format!("must lie in (0, 1], got {f}"));
            }
            (None, Some(0)) => return err("omega", "must be >= 1".into()),
            _ => {}
        }
        for (i, c) in self.corruptions.iter().enumerate() {
            if c.validate().is_err() {
                return err(&format!("corruptions[{i}].severity"), format!("out of range for {:?}: {}", c.kind, c.severity));
            }
        }
        if self.pairing.uses(BlockKind::Robustness) && self.corruptions.is_empty() {
            return err("corruptions", format!("pairing '{}' needs at least one corruption", self.pairing.code()));
        }
        if self.sweep.lambdas.is_empty() {
            return err("sweep.lambdas", "must be non-empty".into());
        }
        for (i, &l) in self.sweep.lambdas.iter().enumerate() {
            check_unit(&format!("sweep.lambdas[{i}]"), l)?;
        }
        if let Some(s) = &self.search {
            if !s.threshold.is_finite() {
                return err("search.threshold", "must be finite".into());
            }
            for (field, m) in [("search.target_metric", Some(s.target_metric.as_str())), ("search.second_metric", s.second_metric.as_deref())] {
                if let Some(m) = m {
                    if !METRICS.contains(&m) {
                        return err(field, format!("unknown metric '{m}' (expected one of {})", METRICS.join(", ")));
                    }
                }
            }
            if s.fractions.is_empty() {
                return err("search.fractions", "must be non-empty".into());
            }
            for (i, &f) in s.fractions.iter().enumerate() {
                if !(f > 0.0 && f <= 1.0) {
                    return err(&format!("search.fractions[{i}]"), format!("must lie in (0, 1], got {f}"));
                }
            }
        }
        if !(self.saug.epsilon > 0.0) {
            return err("saug.epsilon", format!("must be > 0, got {}", self.saug.epsilon));
        }
        if self.saug.max_rounds == 0 {
            return err("saug.max_rounds", "must be >= 1".into());
        }
        if !(self.saug.budget > 0.0) {
            return err("saug.budget", format!("must be > 0, got {}", self.saug.budget));
        }
        let o = &self.oracle;
        if o.k > o.n || o.n == 0 || o.d == 0 {
            return err("oracle", format!("need 1 <= n, 1 <= d and k <= n (n={}, d={}, k={})", o.n, o.d, o.k));
        }
        if !(o.coherence_cap > 0.0 && o.coherence_cap < 1.0) {
            return err("oracle.coherence_cap", format!("must lie in (0, 1), got {}", o.coherence_cap));
        }
        Ok(())
    }

    /// `omega = floor(fraction * n_train)`, or the explicit omega.
    pub fn omega(&self, n_train: usize) -> Result<usize, ConfigError> {
        let w = match (self.fraction, self.omega) {
            (_, Some(w)) => w,
            (Some(f), None) => (f * n_train as f64).floor() as usize,
            (None, None) => 0,
        };
        if w == 0 {
            return Err(ConfigError::new("fraction", format!("selects no points out of {n_train}")));
        }
        Ok(w)
    }

    /// The fraction reported in metrics rows.
    pub fn effective_fraction(&self, n_train: usize) -> f64 {
        match (self.fraction, self.omega) {
            (Some(f), _) => f,
            (None, Some(w)) => w as f64 / n_train.max(1) as f64,
            _ => 0.0,
        }
    }

    pub fn model_spec(&self, input_dim: usize) -> ModelSpec {
        self.model.spec(input_dim)
    }
}

fn check_unit(field: &str, v: f64) -> Result<(), ConfigError> {
    if (0.0..=1.0).contains(&v) {
        Ok(())
    } else {
        Err(ConfigError::new(field, format!("must lie in [0, 1], got {v}")))
    }
}

/// Best-effort field name from a serde error message.
fn json_field(e: &serde_json::Error) -> String {
    let msg = e.to_string();
    for marker in ["unknown field `", "missing field `"] {
        if let Some(rest) = msg.split(marker).nth(1) {
            if let Some(name) = rest.split('`').next() {
                return name.to_string();
            }
        }
    }
    "config".to_string()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn base() -> RunConfig {
        RunConfig::synthetic(200, 3, 0.8)
    }

    #[test]
    fn minimal_json_fills_defaults() {
        let c = RunConfig::from_json(r#"{"dataset": {"synthetic": {"n": 100, "input_dim": 2, "bias_strength": 0.5}}, "fraction": 0.4}"#)
            .unwrap();
        assert_eq!(c.pairing, Pairing::AccuracyFairness);
        assert_eq!(c.sweep.lambdas.len(), 7);
        assert_eq!(c.model.kind, ModelKind::Logistic);
        c.validate().unwrap();
        let round: RunConfig = serde_json::from_str(&serde_json::to_string(&c).unwrap()).unwrap();
        assert_eq!(round, c);
    }

    #[test]
    fn errors_name_the_field() {
        let mut c = base();
        c.lambda = 1.5;
        assert_eq!(c.validate().unwrap_err().field, "lambda");
        let mut c = base();
        c.fraction = Some(0.0);
        assert_eq!(c.validate().unwrap_err().field, "fraction");
        let mut c = base();
        c.omega = Some(3);
        assert!(c.validate().unwrap_err().message.contains("not both"));
        let mut c = base();
        c.sweep.lambdas = vec![0.2, -0.1];
        assert_eq!(c.validate().unwrap_err().field, "sweep.lambdas[1]");
        let e = RunConfig::from_json(r#"{"dataset": {"synthetic": {"n": 100, "input_dim": 2, "bias_strength": 0.5}}, "lamda": 1}"#)
            .unwrap_err();
        assert_eq!(e.field, "lamda");
    }

    #[test]
    fn overrides_apply() {
        let mut c = base();
        c.omega = Some(4);
        c.fraction = None;
        c.apply(&Overrides { lambda: Some(0.3), fraction: Some(0.2), pairing: Some(Pairing::AccuracyRobustness), ..Default::default() });
        assert_eq!((c.lambda, c.fraction, c.omega, c.pairing), (0.3, Some(0.2), None, Pairing::AccuracyRobustness));
        assert_eq!(c.omega(160).unwrap(), 32);
    }
}
