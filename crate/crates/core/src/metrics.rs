//! Evaluation and data-map metrics: error rate, robust accuracy, the
//! disparities, counterfactual confidence gap, predictive entropy,
//! distinctiveness, and Pareto frontier extraction.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::{norm, sub};
use crate::trainkit::{Example, LabeledDataset, ModelState};

pub use crate::valuation::{dp_disparity, eo_disparity};

/// Confidence clamp for the entropy term.
pub const CONFIDENCE_CLAMP: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MetricsError {
    #[error("evaluation set is empty")]
    EmptySet,
    #[error("reference subset is empty")]
    EmptySubset,
    #[error("model has no sensitive input feature")]
    NoSensitiveFeature,
}

pub type Result<T> = std::result::Result<T, MetricsError>;

/// Fraction misclassified at threshold 0.5.
pub fn error_rate(model: &ModelState, testset: &LabeledDataset) -> Result<f64> {
    if testset.is_empty() {
        return Err(MetricsError::EmptySet);
    }
    let wrong = testset.rows.iter().filter(|r| model.predict_class(&r.features) != r.class()).count();
    Ok(wrong as f64 / testset.len() as f64)
}

pub fn accuracy(model: &ModelState, testset: &LabeledDataset) -> Result<f64> {
    error_rate(model, testset).map(|e| 1.0 - e)
}

/// Mean accuracy over the corrupted test sets.
pub fn robust_accuracy(model: &ModelState, corrupted: &[LabeledDataset]) -> Result<f64> {
    if corrupted.is_empty() {
        return Err(MetricsError::EmptySet);
    }
    let mut total = 0.0;
    for set in corrupted {
        total += accuracy(model, set)?;
    }
    Ok(total / corrupted.len() as f64)
}

/// `|f(x) - f(x')|` where `x'` toggles the binary sensitive input at
/// `sensitive_feature` and `f` is the confidence on the point's label.
pub fn cf_gap(model: &ModelState, point: &Example, sensitive_feature: Option<usize>) -> Result<f64> {
    let s = sensitive_feature.filter(|&s| s < point.features.len()).ok_or(MetricsError::NoSensitiveFeature)?;
    let mut toggled = point.features.clone();
    toggled[s] = if toggled[s] >= 0.5 { 0.0 } else { 1.0 };
    Ok((model.confidence(&point.features, point.label) - model.confidence(&toggled, point.label)).abs())
}

/// Predictive entropy term `-f ln f` of the confidence on the point's label.
pub fn uncertainty(model: &ModelState, point: &Example) -> f64 {
    let f = model.confidence(&point.features, point.label).clamp(CONFIDENCE_CLAMP, 1.0);
    -f * f.ln()
}

/// Mean Euclidean distance from the point's embedding to each subset
/// element's. Embeddings are hidden activations for an MLP, raw inputs otherwise.
pub fn distinctiveness(model: &ModelState, point: &Example, subset: &[Example]) -> Result<f64> {
    if subset.is_empty() {
        return Err(MetricsError::EmptySubset);
    }
    let fv = model.embedding(&point.features);
    let total: f64 = subset.iter().map(|e| norm(&sub(&fv, &model.embedding(&e.features)))).sum();
    Ok(total / subset.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ParetoPoint {
    pub lambda: f64,
    /// Error-type metric (lower is better).
    pub metric_x: f64,
    /// Disparity-type metric (lower is better).
    pub metric_y: f64,
}

impl ParetoPoint {
    pub fn new(lambda: f64, metric_x: f64, metric_y: f64) -> Self {
        Self { lambda, metric_x, metric_y }
    }

    pub fn dominates(&self, other: &Self) -> bool {
        self.metric_x <= other.metric_x
            && self.metric_y <= other.metric_y
            && (self.metric_x < other.metric_x || self.metric_y < other.metric_y)
    }
}

/// Non-dominated points under joint minimization, sorted by `metric_x`
/// (then `metric_y`, then `lambda`). Points with a NaN metric are dropped.
pub fn pareto_frontier(points: &[ParetoPoint]) -> Vec<ParetoPoint> {
    let valid: Vec<ParetoPoint> =
        points.iter().copied().filter(|p| !p.metric_x.is_nan() && !p.metric_y.is_nan()).collect();
    let mut front: Vec<ParetoPoint> =
        valid.iter().copied().filter(|p| !valid.iter().any(|q| q.dominates(p))).collect();
    front.sort_by(|a, b| {
        a.metric_x.total_cmp(&b.metric_x).then(a.metric_y.total_cmp(&b.metric_y)).then(a.lambda.total_cmp(&b.lambda))
    });
    front
}

/// Metrics of one model on one test set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub dataset: String,
    pub model: String,
    pub seed: u64,
    pub er: f64,
    /// Standard accuracy, `1 - er`.
    pub sa: f64,
    pub eo_disp: Option<f64>,
    pub dp_disp: Option<f64>,
    pub ra: Option<f64>,
}

impl MetricReport {
    /// Disparities are reported when the test set carries the sensitive
    /// attribute in every row; RA when corrupted sets are given.
    pub fn evaluate(
        model: &ModelState,
        testset: &LabeledDataset,
        corrupted: &[LabeledDataset],
        dataset: impl Into<String>,
        seed: u64,
    ) -> Result<Self> {
        let er = error_rate(model, testset)?;
        let has_z = testset.rows.iter().all(|r| r.sensitive.is_some());
        let eo_disp = if has_z { eo_disparity(model, testset).ok() } else { None };
        let dp_disp = if has_z { dp_disparity(model, testset).ok() } else { None };
        let ra = if corrupted.is_empty() { None } else { Some(robust_accuracy(model, corrupted)?) };
        Ok(Self {
            dataset: dataset.into(),
            model: format!("{:?}", model.spec.kind),
            seed,
            er,
            sa: 1.0 - er,
            eo_disp,
            dp_disp,
            ra,
        })
    }

    /// Looks a metric up by its CSV column name.
    pub fn get(&self, name: &str) -> Option<f64> {
        match name {
            "er" => Some(self.er),
            "sa" => Some(self.sa),
            "eo_disp" => self.eo_disp,
            "dp_disp" => self.dp_disp,
            "ra" => self.ra,
            "re" => self.ra.map(|a| 1.0 - a),
            _ => None,
        }
    }
}
