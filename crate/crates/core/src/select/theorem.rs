use std::collections::HashSet;

use serde::Serialize;

use super::{data_replace, ColumnId, FeatureColumn, Outcome, Result, SelectionBuffer};
use crate::linalg::{axpy, dot};

/// Per-entry view of the replacement conditions against one candidate.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EntryCondition {
    pub id: ColumnId,
    pub optimal: bool,
    /// `|rho . z|`
    pub projection: f64,
    pub coefficient: f64,
    /// `|rho . x| > |rho . z|`
    pub dominated: bool,
    /// `coefficient < 0`
    pub negative: bool,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TheoremReport {
    pub candidate: ColumnId,
    pub candidate_projection: f64,
    pub entries: Vec<EntryCondition>,
    pub non_optimal_count: usize,
    /// Every non-optimal entry is dominated by the candidate and has a
    /// negative coefficient (vacuously true when there are none).
    pub conditions_hold: bool,
    /// An optimal-support entry also passes the replacement gate with a score
    /// at least as large as the predicted one. The conditions only speak
    /// about non-optimal entries while the replacement scan covers all of
    /// them, so the prediction does not apply in that case.
    pub optimal_competitor: bool,
    /// `argmax (|rho . z| + beta_z)` over non-optimal entries.
    pub predicted_eviction: Option<ColumnId>,
    /// What `data_replace` actually did on a copy of the state; `None` when
    /// only a prediction was requested.
    pub actual: Option<Outcome>,
}

impl TheoremReport {
    /// The conditions hold, there is something to evict, and no optimal entry
    /// competes in the scan.
    pub fn premises_hold(&self) -> bool {
        self.conditions_hold && self.non_optimal_count > 0 && !self.optimal_competitor
    }

    pub fn is_vacuous(&self) -> bool {
        self.non_optimal_count == 0
    }

    /// `Some(true)` when the premises hold and the actual eviction matches the
    /// prediction; `None` when the premises do not hold or no replacement ran.
    pub fn consistent(&self) -> Option<bool> {
        if !self.premises_hold() {
            return None;
        }
        let actual = self.actual?;
        Some(matches!((actual, self.predicted_eviction), (Outcome::Replaced { evicted }, Some(p)) if evicted == p))
    }
}

/// Evaluates the replacement conditions without running the replacement.
pub fn predict_eviction(
    residual: &[f64],
    candidate: &FeatureColumn,
    buffer: &SelectionBuffer,
    optimal_support: &HashSet<ColumnId>,
) -> Result<TheoremReport> {
    buffer.check_dim(residual.len())?;
    buffer.check_dim(candidate.dim())?;
    let pi = dot(&candidate.values, residual).abs();
    let entries: Vec<EntryCondition> = buffer
        .entries()
        .iter()
        .map(|e| {
            let projection = dot(&e.column.values, residual).abs();
            EntryCondition {
                id: e.id,
                optimal: optimal_support.contains(&e.id),
                projection,
                coefficient: e.coefficient,
                dominated: pi > projection,
                negative: e.coefficient < 0.0,
                score: projection + e.coefficient,
            }
        })
        .collect();
    let non_optimal: Vec<&EntryCondition> = entries.iter().filter(|c| !c.optimal).collect();
    let conditions_hold = non_optimal.iter().all(|c| c.dominated && c.negative);
    let mut predicted: Option<&EntryCondition> = None;
    for c in &non_optimal {
        if predicted.map_or(true, |p| c.score > p.score) {
            predicted = Some(c);
        }
    }
    let optimal_competitor = match predicted {
        Some(p) => entries.iter().any(|c| c.optimal && c.dominated && c.coefficient <= 0.0 && c.score >= p.score),
        None => false,
    };
    Ok(TheoremReport {
        candidate: candidate.id,
        candidate_projection: pi,
        non_optimal_count: non_optimal.len(),
        conditions_hold,
        optimal_competitor,
        predicted_eviction: predicted.map(|p| p.id),
        entries,
        actual: None,
    })
}

/// Checks the sufficient replacement conditions for `candidate` on the given
/// state and compares the predicted eviction with what [`data_replace`] does
/// on a copy of the buffer. The state's target is reconstructed as
/// `approximation + residual`.
pub fn check_eviction_rule(
    residual: &[f64],
    candidate: &FeatureColumn,
    buffer: &SelectionBuffer,
    optimal_support: &HashSet<ColumnId>,
) -> Result<TheoremReport> {
    let mut report = predict_eviction(residual, candidate, buffer, optimal_support)?;
    if buffer.is_full() {
        let mut target = buffer.approximation().to_vec();
        axpy(&mut target, 1.0, residual);
        let mut copy = buffer.clone();
        report.actual = Some(data_replace(&target, &mut copy, candidate.clone())?.outcome);
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit(p: usize, v: &[f64]) -> FeatureColumn {
        FeatureColumn::normalized(ColumnId::new(1, p), v).unwrap()
    }

    #[test]
    fn vacuous_when_buffer_is_all_optimal() {
        let buf = SelectionBuffer::with_coefficients(1, 2, [(unit(0, &[0.0, 1.0]), 0.3)]).unwrap();
        let opt: HashSet<_> = [ColumnId::new(1, 0)].into();
        let rep = check_eviction_rule(&[1.0, 0.0], &unit(1, &[1.0, 0.0]), &buf, &opt).unwrap();
        assert!(rep.is_vacuous());
        assert!(rep.conditions_hold);
        assert_eq!(rep.consistent(), None);
    }

    #[test]
    fn matches_data_replace_on_hand_example() {
        let buf = SelectionBuffer::with_coefficients(1, 2, [(unit(0, &[0.0, 1.0]), -0.2)]).unwrap();
        let rep = check_eviction_rule(&[1.0, 0.2], &unit(1, &[1.0, 0.0]), &buf, &HashSet::new()).unwrap();
        assert!(rep.premises_hold());
        assert_eq!(rep.predicted_eviction, Some(ColumnId::new(1, 0)));
        assert_eq!(rep.actual, Some(Outcome::Replaced { evicted: ColumnId::new(1, 0) }));
        assert_eq!(rep.consistent(), Some(true));
    }

    #[test]
    fn weak_candidate_fails_conditions_and_is_rejected() {
        // |rho . x| = 0.1 below both buffered projections.
        let a = unit(0, &[0.0, 1.0, 0.0]);
        let b = unit(1, &[0.0, 0.0, 1.0]);
        let buf = SelectionBuffer::with_coefficients(2, 3, [(a, -0.3), (b, -0.1)]).unwrap();
        let rho = [0.1, 0.5, 0.4];
        let rep = check_eviction_rule(&rho, &unit(2, &[1.0, 0.0, 0.0]), &buf, &HashSet::new()).unwrap();
        assert!(!rep.conditions_hold);
        assert!(!rep.premises_hold());
        assert_eq!(rep.actual, Some(Outcome::Rejected));
    }
}
