//! Seeded synthetic instances (sparse-recovery problems, biased binary
//! classification data) and plain CSV dataset I/O.

use std::path::Path;

use rand::seq::index::sample;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::{axpy, dot};
use crate::trainkit::{Example, LabeledDataset};

/// Draws allowed per column before the coherence cap is declared unreachable.
pub const MAX_ATTEMPTS: usize = 10_000;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SynthError {
    #[error("no column satisfying the coherence cap after {attempts} attempts (column {column})")]
    RejectionExhausted { column: usize, attempts: usize },
    #[error("invalid generator spec: {0}")]
    InvalidSpec(String),
    #[error("missing column '{0}'")]
    MissingColumn(String),
    #[error("non-numeric cell at data row {row}, column '{col}'")]
    NonNumericCell { row: usize, col: String },
    #[error("data row {row} has {got} cells, header has {expected}")]
    RaggedRow { row: usize, expected: usize, got: usize },
    #[error("sensitive value at data row {row} is not 0 or 1")]
    InvalidSensitive { row: usize },
    #[error("file is empty")]
    EmptyFile,
    #[error("i/o: {0}")]
    Io(String),
}

impl From<std::io::Error> for SynthError {
    fn from(e: std::io::Error) -> Self {
        SynthError::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, SynthError>;

/// A sparse-approximation problem with a planted support.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SparseInstance {
    /// Unit-norm columns.
    pub columns: Vec<Vec<f64>>,
    /// Sorted planted support.
    pub true_support: Vec<usize>,
    /// Coefficients, aligned with `true_support`.
    pub true_coefficients: Vec<f64>,
    pub target: Vec<f64>,
    pub noise_sigma: f64,
}

impl SparseInstance {
    pub fn n(&self) -> usize {
        self.columns.len()
    }

    pub fn dim(&self) -> usize {
        self.target.len()
    }

    pub fn max_coherence(&self) -> f64 {
        let mut m: f64 = 0.0;
        for i in 0..self.columns.len() {
            for j in 0..i {
                m = m.max(dot(&self.columns[i], &self.columns[j]).abs());
            }
        }
        m
    }
}

fn unit_gaussian(rng: &mut ChaCha8Rng, d: usize) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();
        let n = dot(&v, &v).sqrt();
        if n > 1e-12 {
            return v.into_iter().map(|x| x / n).collect();
        }
    }
}

/// `n` unit columns in dimension `d` with pairwise `|<x_i, x_j>| <= coherence_cap`,
/// a random `k`-support with coefficients of magnitude in [1, 2] and random
/// sign, and `target = sum c_i x_i + N(0, sigma^2)`.
pub fn gen_sparse_instance(
    n: usize,
    d: usize,
    k: usize,
    noise_sigma: f64,
    coherence_cap: f64,
    seed: u64,
) -> Result<SparseInstance> {
    if d == 0 || k > n {
        return Err(SynthError::InvalidSpec(format!("need d >= 1 and k <= n (n={n}, d={d}, k={k})")));
    }
    if !(coherence_cap > 0.0 && coherence_cap < 1.0) {
        return Err(SynthError::InvalidSpec(format!("coherence_cap must lie in (0, 1), got {coherence_cap}")));
    }
    if !(noise_sigma >= 0.0 && noise_sigma.is_finite()) {
        return Err(SynthError::InvalidSpec(format!("noise_sigma must be >= 0, got {noise_sigma}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut columns: Vec<Vec<f64>> = Vec::with_capacity(n);
    for column in 0..n {
        let mut accepted = None;
        for _ in 0..MAX_ATTEMPTS {
            let v = unit_gaussian(&mut rng, d);
            if columns.iter().all(|c| dot(c, &v).abs() <= coherence_cap) {
                accepted = Some(v);
                break;
            }
        }
        columns.push(accepted.ok_or(SynthError::RejectionExhausted { column, attempts: MAX_ATTEMPTS })?);
    }
    let mut support = sample(&mut rng, n, k).into_vec();
    support.sort_unstable();
    let coefficients: Vec<f64> = support
        .iter()
        .map(|_| {
            let sign = if rng.random::<bool>() { 1.0 } else { -1.0 };
            sign * rng.random_range(1.0..2.0)
        })
        .collect();
    let mut target = vec![0.0; d];
    for (&i, &c) in support.iter().zip(&coefficients) {
        axpy(&mut target, c, &columns[i]);
    }
    if noise_sigma > 0.0 {
        for t in &mut target {
            *t += noise_sigma * rng.sample::<f64, _>(StandardNormal);
        }
    }
    Ok(SparseInstance { columns, true_support: support, true_coefficients: coefficients, target, noise_sigma })
}

/// Binary classification with a binary sensitive attribute `z` tied to the
/// label: with probability `bias_strength` z copies y, otherwise it is a fair
/// coin. Features are Gaussian with class means `±separation/2` spread over
/// every coordinate; `z` is appended as the last input feature.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BiasedClassificationSpec {
    pub n: usize,
    pub input_dim: usize,
    pub bias_strength: f64,
    /// P(y = 1).
    #[serde(default = "half")]
    pub class_balance: f64,
    /// Distance between the class means.
    #[serde(default = "one")]
    pub separation: f64,
    #[serde(default)]
    pub seed: u64,
}

fn half() -> f64 {
    0.5
}

fn one() -> f64 {
    1.0
}

/// Fraction of generated rows that go to the training split.
pub const TRAIN_SPLIT: f64 = 0.8;

impl BiasedClassificationSpec {
    pub fn new(n: usize, input_dim: usize, bias_strength: f64, seed: u64) -> Self {
        Self { n, input_dim, bias_strength, class_balance: 0.5, separation: 1.0, seed }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n < 2 {
            return Err(SynthError::InvalidSpec(format!("n must be >= 2, got {}", self.n)));
        }
        if self.input_dim == 0 {
            return Err(SynthError::InvalidSpec("input_dim must be >= 1".into()));
        }
        if !(0.0..=1.0).contains(&self.bias_strength) {
            return Err(SynthError::InvalidSpec(format!("bias_strength must lie in [0, 1], got {}", self.bias_strength)));
        }
        if !(self.class_balance > 0.0 && self.class_balance < 1.0) {
            return Err(SynthError::InvalidSpec(format!("class_balance must lie in (0, 1), got {}", self.class_balance)));
        }
        if !(self.separation >= 0.0 && self.separation.is_finite()) {
            return Err(SynthError::InvalidSpec(format!("separation must be >= 0, got {}", self.separation)));
        }
        Ok(())
    }
}

/// Returns `(train, validation)` split 80/20 after a seeded shuffle.
pub fn gen_biased_classification(spec: &BiasedClassificationSpec) -> Result<(LabeledDataset, LabeledDataset)> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let shift = spec.separation / 2.0 / (spec.input_dim as f64).sqrt();
    let mut rows = Vec::with_capacity(spec.n);
    for _ in 0..spec.n {
        let y = u8::from(rng.random::<f64>() < spec.class_balance);
        let z = if rng.random::<f64>() < spec.bias_strength { y } else { u8::from(rng.random::<bool>()) };
        let mean = if y == 1 { shift } else { -shift };
        let mut features: Vec<f64> =
            (0..spec.input_dim).map(|_| mean + rng.sample::<f64, _>(StandardNormal)).collect();
        features.push(f64::from(z));
        rows.push(Example::new(features, f64::from(y)).with_sensitive(z));
    }
    rows.shuffle(&mut rng);
    let n_train = ((spec.n as f64) * TRAIN_SPLIT).round() as usize;
    let validation = rows.split_off(n_train);
    let mut names: Vec<String> = (0..spec.input_dim).map(|i| format!("x{i}")).collect();
    names.push("z".into());
    let make = |rows| LabeledDataset { feature_names: names.clone(), rows, sensitive_feature: Some(spec.input_dim) };
    Ok((make(rows), make(validation)))
}

/// Which CSV columns carry the label and (optionally) the sensitive attribute.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CsvSchema {
    pub label: String,
    #[serde(default)]
    pub sensitive: Option<String>,
}

impl CsvSchema {
    pub fn new(label: impl Into<String>, sensitive: Option<&str>) -> Self {
        Self { label: label.into(), sensitive: sensitive.map(str::to_string) }
    }

    /// The schema `write_csv` produces for `data`.
    pub fn for_dataset(data: &LabeledDataset) -> Self {
        Self {
            label: "label".into(),
            sensitive: data.sensitive_feature.and_then(|s| data.feature_names.get(s).cloned()),
        }
    }
}

/// Parses comma-separated text with a header row. Every column except the
/// label becomes a feature, in file order; the sensitive column stays a
/// feature and also sets each row's sensitive attribute. `row` in errors is
/// the 0-based data row.
pub fn parse_csv(text: &str, schema: &CsvSchema) -> Result<LabeledDataset> {
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let header: Vec<String> = lines.next().ok_or(SynthError::EmptyFile)?.split(',').map(|h| h.trim().to_string()).collect();
    let find = |name: &str| header.iter().position(|h| h == name).ok_or_else(|| SynthError::MissingColumn(name.to_string()));
    let label_col = find(&schema.label)?;
    let sensitive_col = schema.sensitive.as_deref().map(find).transpose()?;
    let feature_cols: Vec<usize> = (0..header.len()).filter(|&c| c != label_col).collect();

    let mut rows = Vec::new();
    for (row, line) in lines.enumerate() {
        let cells: Vec<&str> = line.split(',').map(str::trim).collect();
        if cells.len() != header.len() {
            return Err(SynthError::RaggedRow { row, expected: header.len(), got: cells.len() });
        }
        let parse = |c: usize| -> Result<f64> {
            cells[c]
                .parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| SynthError::NonNumericCell { row, col: header[c].clone() })
        };
        let features = feature_cols.iter().map(|&c| parse(c)).collect::<Result<Vec<_>>>()?;
        let mut ex = Example::new(features, parse(label_col)?);
        if let Some(s) = sensitive_col {
            let z = parse(s)?;
            if z != 0.0 && z != 1.0 {
                return Err(SynthError::InvalidSensitive { row });
            }
            ex = ex.with_sensitive(z as u8);
        }
        rows.push(ex);
    }
    Ok(LabeledDataset {
        feature_names: feature_cols.iter().map(|&c| header[c].clone()).collect(),
        rows,
        sensitive_feature: sensitive_col.map(|s| feature_cols.iter().position(|&c| c == s).expect("feature column")),
    })
}

pub fn load_csv(path: &Path, schema: &CsvSchema) -> Result<LabeledDataset> {
    parse_csv(&std::fs::read_to_string(path)?, schema)
}

/// Feature columns then a `label` column. Values use the shortest
/// representation that parses back to the same `f64`.
pub fn to_csv(data: &LabeledDataset) -> String {
    let mut out = data.feature_names.join(",");
    out.push_str(if data.feature_names.is_empty() { "label\n" } else { ",label\n" });
    for r in &data.rows {
        for v in &r.features {
            out.push_str(&format!("{v},"));
        }
        out.push_str(&format!("{}\n", r.label));
    }
    out
}

/// Writes atomically; load back with [`CsvSchema::for_dataset`].
pub fn write_csv(path: &Path, data: &LabeledDataset) -> Result<()> {
    crate::io::write_atomic(path, to_csv(data).as_bytes())?;
    Ok(())
}
