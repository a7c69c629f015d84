use std::fmt;

use serde::{Deserialize, Serialize};

use super::{check_lambda, Result, ValuationError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BlockKind {
    Accuracy,
    Fairness,
    Robustness,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Block {
    pub kind: BlockKind,
    pub len: usize,
}

/// Ordered, labeled coordinate blocks of a value vector.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Layout {
    pub blocks: Vec<Block>,
}

impl Layout {
    pub fn new(blocks: Vec<Block>) -> Self {
        Self { blocks }
    }

    pub fn dim(&self) -> usize {
        self.blocks.iter().map(|b| b.len).sum()
    }

    /// Coordinate range of the first block of `kind`.
    pub fn range(&self, kind: BlockKind) -> Option<std::ops::Range<usize>> {
        let mut start = 0;
        for b in &self.blocks {
            if b.kind == kind {
                return Some(start..start + b.len);
            }
            start += b.len;
        }
        None
    }
}

impl fmt::Display for Layout {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.blocks.iter().map(|b| format!("{:?}[{}]", b.kind, b.len)).collect();
        write!(f, "{}", parts.join("+"))
    }
}

/// Value change caused by one SGD step (or a composite of several blocks).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IncrementalValue {
    pub values: Vec<f64>,
    pub layout: Layout,
    /// `(epoch, datapoint)` of the step that produced it.
    pub source: Option<(u32, usize)>,
}

impl IncrementalValue {
    pub fn single(kind: BlockKind, values: Vec<f64>) -> Self {
        let layout = Layout::new(vec![Block { kind, len: values.len() }]);
        Self { values, layout, source: None }
    }

    pub fn with_source(mut self, epoch: u32, datapoint: usize) -> Self {
        self.source = Some((epoch, datapoint));
        self
    }

    fn sole_kind(&self) -> Result<BlockKind> {
        match self.layout.blocks.as_slice() {
            [b] => Ok(b.kind),
            _ => Err(ValuationError::InvalidPairing(format!("expected a single block, got {}", self.layout))),
        }
    }
}

/// The cumulative value vector an epoch's columns are fit against.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValueTarget {
    pub values: Vec<f64>,
    pub layout: Layout,
    pub lambda: f64,
}

/// Which value functions a run trades off. `lambda` weights the first.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Pairing {
    /// Accuracy vs fairness.
    #[serde(rename = "af")]
    AccuracyFairness,
    /// Accuracy vs robustness.
    #[serde(rename = "ar")]
    AccuracyRobustness,
    /// Robustness vs fairness.
    #[serde(rename = "rf")]
    RobustnessFairness,
    /// Accuracy alone; lambda is ignored.
    #[serde(rename = "accuracy")]
    AccuracyOnly,
}

impl Pairing {
    pub fn families(&self) -> (BlockKind, Option<BlockKind>) {
        use BlockKind::*;
        match self {
            Pairing::AccuracyFairness => (Accuracy, Some(Fairness)),
            Pairing::AccuracyRobustness => (Accuracy, Some(Robustness)),
            Pairing::RobustnessFairness => (Robustness, Some(Fairness)),
            Pairing::AccuracyOnly => (Accuracy, None),
        }
    }

    pub fn uses(&self, kind: BlockKind) -> bool {
        let (a, b) = self.families();
        a == kind || b == Some(kind)
    }

    pub fn code(&self) -> &'static str {
        match self {
            Pairing::AccuracyFairness => "af",
            Pairing::AccuracyRobustness => "ar",
            Pairing::RobustnessFairness => "rf",
            Pairing::AccuracyOnly => "accuracy",
        }
    }

    pub fn from_blocks(first: BlockKind, second: BlockKind) -> Option<Self> {
        use BlockKind::*;
        match (first, second) {
            (Accuracy, Fairness) => Some(Pairing::AccuracyFairness),
            (Accuracy, Robustness) => Some(Pairing::AccuracyRobustness),
            (Robustness, Fairness) => Some(Pairing::RobustnessFairness),
            _ => None,
        }
    }
}

impl std::str::FromStr for Pairing {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "af" => Ok(Pairing::AccuracyFairness),
            "ar" => Ok(Pairing::AccuracyRobustness),
            "rf" => Ok(Pairing::RobustnessFairness),
            "accuracy" | "a" => Ok(Pairing::AccuracyOnly),
            other => Err(format!("unknown pairing '{other}' (expected af, ar, rf or accuracy)")),
        }
    }
}

/// `lambda * first ++ (1 - lambda) * second`. The two blocks must form one of
/// the accuracy/fairness, accuracy/robustness or robustness/fairness pairs,
/// in that order.
pub fn compose_target(first: &IncrementalValue, second: &IncrementalValue, lambda: f64) -> Result<IncrementalValue> {
    check_lambda(lambda)?;
    let (a, b) = (first.sole_kind()?, second.sole_kind()?);
    if Pairing::from_blocks(a, b).is_none() {
        return Err(ValuationError::InvalidPairing(format!("{a:?} with {b:?}")));
    }
    let mut values: Vec<f64> = first.values.iter().map(|v| lambda * v).collect();
    values.extend(second.values.iter().map(|v| (1.0 - lambda) * v));
    let mut blocks = first.layout.blocks.clone();
    blocks.extend(second.layout.blocks.iter().copied());
    Ok(IncrementalValue { values, layout: Layout::new(blocks), source: first.source.or(second.source) })
}

/// Running coordinate-wise sum of increments sharing one layout.
#[derive(Debug, Clone, PartialEq)]
pub struct CumulativeTarget {
    layout: Layout,
    values: Vec<f64>,
    count: usize,
}

impl CumulativeTarget {
    pub fn new(layout: Layout) -> Self {
        let values = vec![0.0; layout.dim()];
        Self { layout, values, count: 0 }
    }

    pub fn add(&mut self, inc: &IncrementalValue) -> Result<()> {
        if inc.layout != self.layout {
            return Err(ValuationError::LayoutMismatch {
                expected: self.layout.to_string(),
                got: inc.layout.to_string(),
            });
        }
        for (acc, v) in self.values.iter_mut().zip(&inc.values) {
            *acc += v;
        }
        self.count += 1;
        Ok(())
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn count(&self) -> usize {
        self.count
    }

    pub fn to_target(&self, lambda: f64) -> ValueTarget {
        ValueTarget { values: self.values.clone(), layout: self.layout.clone(), lambda }
    }
}

/// Sums every increment; all must share the first one's layout.
pub fn cumulative_target(increments: &[IncrementalValue], lambda: f64) -> Result<ValueTarget> {
    check_lambda(lambda)?;
    let first = increments.first().ok_or(ValuationError::NoIncrements)?;
    let mut acc = CumulativeTarget::new(first.layout.clone());
    for inc in increments {
        acc.add(inc)?;
    }
    Ok(acc.to_target(lambda))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn acc(v: &[f64]) -> IncrementalValue {
        IncrementalValue::single(BlockKind::Accuracy, v.to_vec())
    }

    fn fair(v: f64) -> IncrementalValue {
        IncrementalValue::single(BlockKind::Fairness, vec![v])
    }

    #[test]
    fn lambda_endpoints_and_midpoint() {
        let (a, f) = (acc(&[2.0, 4.0]), fair(6.0));
        assert_eq!(compose_target(&a, &f, 1.0).unwrap().values, vec![2.0, 4.0, 0.0]);
        assert_eq!(compose_target(&a, &f, 0.0).unwrap().values, vec![0.0, 0.0, 6.0]);
        assert_eq!(compose_target(&a, &f, 0.5).unwrap().values, vec![1.0, 2.0, 3.0]);
    }

    #[test]
    fn compose_rejects_bad_input() {
        let (a, f) = (acc(&[1.0]), fair(1.0));
        assert_eq!(compose_target(&a, &f, 1.5).unwrap_err(), ValuationError::InvalidLambda(1.5));
        assert!(matches!(compose_target(&f, &a, 0.5), Err(ValuationError::InvalidPairing(_))));
        assert!(matches!(compose_target(&a, &a, 0.5), Err(ValuationError::InvalidPairing(_))));
    }

    #[test]
    fn cumulative_examples() {
        let t = cumulative_target(&[acc(&[1.0, -2.0])], 1.0).unwrap();
        assert_eq!(t.values, vec![1.0, -2.0]);
        let z = cumulative_target(&[acc(&[0.0, 0.0]), acc(&[0.0, 0.0])], 1.0).unwrap();
        assert_eq!(z.values, vec![0.0, 0.0]);
        assert_eq!(cumulative_target(&[], 1.0).unwrap_err(), ValuationError::NoIncrements);
        assert!(matches!(cumulative_target(&[acc(&[1.0]), fair(1.0)], 1.0), Err(ValuationError::LayoutMismatch { .. })));
    }

    #[test]
    fn layout_ranges() {
        let c = compose_target(&acc(&[1.0, 2.0]), &fair(3.0), 0.5).unwrap();
        assert_eq!(c.layout.range(BlockKind::Accuracy), Some(0..2));
        assert_eq!(c.layout.range(BlockKind::Fairness), Some(2..3));
        assert_eq!(c.layout.range(BlockKind::Robustness), None);
        assert_eq!("rf".parse::<Pairing>().unwrap(), Pairing::RobustnessFairness);
    }
}
