use serde::Serialize;

use super::{project, ColumnId, FeatureColumn, Result, SelectError, SelectionBuffer, SolverTrace, TraceRecord};
use crate::linalg::{norm, sub};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Outcome {
    /// Fill phase: the buffer had room.
    Inserted,
    /// The incoming column took the slot of `evicted`.
    Replaced { evicted: ColumnId },
    /// No buffered column passed the replacement gate.
    Rejected,
    /// Zero-norm column, not considered.
    Skipped,
}

impl Outcome {
    pub fn changed_membership(&self) -> bool {
        matches!(self, Outcome::Inserted | Outcome::Replaced { .. })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ReplaceDecision {
    pub outcome: Outcome,
    /// `|x . rho|` for the incoming column; absent in the fill phase.
    pub incoming_projection: Option<f64>,
    /// Largest `projection + coefficient` among qualifying entries.
    pub best_eviction_score: Option<f64>,
    pub comparisons: usize,
}

/// Greedy replacement step for a full buffer.
///
/// With `rho = target - approximation` and `pi = |incoming . rho|`, each
/// buffered entry is scanned once in insertion order. An entry qualifies when
/// `pi > |column . rho|` and its coefficient is `<= 0`; the qualifier with the
/// largest `|column . rho| + coefficient` is evicted (strict `>`, so the
/// earliest entry wins ties) and the incoming column is appended.
///
/// `pi` must exceed `pi'` by at least `floor * ||target||` (floor set on the
/// buffer, default 1e-10) so that rounding noise on an already-orthogonal
/// residual cannot trigger swaps.
///
/// Coefficients are *not* refit here; the caller refits.
pub fn data_replace(target: &[f64], buffer: &mut SelectionBuffer, incoming: FeatureColumn) -> Result<ReplaceDecision> {
    if !buffer.is_full() {
        return Err(SelectError::BufferNotFull { len: buffer.len(), capacity: buffer.capacity() });
    }
    buffer.check_dim(target.len())?;
    buffer.check_dim(incoming.dim())?;
    let incoming = incoming.into_normalized()?;
    if buffer.contains(incoming.id) {
        return Err(SelectError::DuplicateColumn(incoming.id));
    }

    let residual = sub(target, buffer.approximation());
    let margin = buffer.projection_floor * norm(target);
    let pi = project(&incoming.values, &residual)?;
    let mut pi_max = f64::NEG_INFINITY;
    let mut chosen: Option<usize> = None;
    let mut comparisons = 0;
    for (idx, entry) in buffer.entries().iter().enumerate() {
        comparisons += 1;
        let pi_prime = project(&entry.column.values, &residual)?;
        let gamma = entry.coefficient;
        if pi > pi_prime + margin && gamma <= 0.0 && pi_prime + gamma > pi_max {
            pi_max = pi_prime + gamma;
            chosen = Some(idx);
        }
    }

    let outcome = match chosen {
        Some(idx) => {
            let evicted = buffer.evict(idx);
            buffer.insert(incoming)?;
            Outcome::Replaced { evicted: evicted.id }
        }
        None => Outcome::Rejected,
    };
    Ok(ReplaceDecision {
        outcome,
        incoming_projection: Some(pi),
        best_eviction_score: chosen.map(|_| pi_max),
        comparisons,
    })
}

/// Processes one incoming column: insert while filling, otherwise
/// [`data_replace`]; then refit whenever membership changed or the target
/// moved since the last fit. Zero-norm columns are skipped with a warning.
pub fn vtrust_step(
    buffer: &mut SelectionBuffer,
    incoming: FeatureColumn,
    target: &[f64],
    trace: &mut SolverTrace,
) -> Result<ReplaceDecision> {
    buffer.check_dim(target.len())?;
    buffer.check_dim(incoming.dim())?;
    let id = incoming.id;
    let step = trace.records.len();
    let incoming = match incoming.into_normalized() {
        Ok(c) => c,
        Err(SelectError::ZeroColumn { norm: n }) => {
            trace.warnings.push(format!("skipped zero-norm column {id} (norm {n:e})"));
            let decision =
                ReplaceDecision { outcome: Outcome::Skipped, incoming_projection: None, best_eviction_score: None, comparisons: 0 };
            trace.records.push(TraceRecord {
                step,
                id,
                outcome: Outcome::Skipped,
                incoming_projection: None,
                best_eviction_score: None,
                residual_norm: norm(&sub(target, buffer.approximation())),
                comparisons: 0,
                rank_deficient: false,
            });
            return Ok(decision);
        }
        Err(e) => return Err(e),
    };

    let decision = if buffer.is_full() {
        data_replace(target, buffer, incoming)?
    } else {
        buffer.insert(incoming)?;
        ReplaceDecision { outcome: Outcome::Inserted, incoming_projection: None, best_eviction_score: None, comparisons: 0 }
    };

    let (residual_norm, rank_deficient) = if !buffer.is_fitted_to(target) {
        let rep = buffer.refit(target)?;
        (rep.residual_norm, rep.rank_deficient)
    } else {
        (norm(&sub(target, buffer.approximation())), false)
    };
    trace.records.push(TraceRecord {
        step,
        id,
        outcome: decision.outcome,
        incoming_projection: decision.incoming_projection,
        best_eviction_score: decision.best_eviction_score,
        residual_norm,
        comparisons: decision.comparisons,
        rank_deficient,
    });
    Ok(decision)
}

/// Streaming selector state: a buffer, its trace, and the current epoch target.
#[derive(Debug, Clone)]
pub struct OnlineSelector {
    buffer: SelectionBuffer,
    trace: SolverTrace,
    target: Vec<f64>,
}

impl OnlineSelector {
    pub fn new(capacity: usize, dim: usize) -> Result<Self> {
        Ok(Self { buffer: SelectionBuffer::new(capacity, dim)?, trace: SolverTrace::default(), target: vec![0.0; dim] })
    }

    /// Sets the target for the columns that follow (one call per epoch).
    pub fn set_target(&mut self, target: Vec<f64>) -> Result<()> {
        self.buffer.check_dim(target.len())?;
        self.target = target;
        Ok(())
    }

    pub fn target(&self) -> &[f64] {
        &self.target
    }

    pub fn step(&mut self, column: FeatureColumn) -> Result<ReplaceDecision> {
        vtrust_step(&mut self.buffer, column, &self.target, &mut self.trace)
    }

    pub fn buffer(&self) -> &SelectionBuffer {
        &self.buffer
    }

    pub fn buffer_mut(&mut self) -> &mut SelectionBuffer {
        &mut self.buffer
    }

    pub fn trace(&self) -> &SolverTrace {
        &self.trace
    }

    pub fn into_parts(self) -> (SelectionBuffer, SolverTrace) {
        (self.buffer, self.trace)
    }
}

/// All columns of one epoch plus the cumulative target they are fit against.
#[derive(Debug, Clone)]
pub struct EpochBatch {
    pub epoch: u32,
    pub target: Vec<f64>,
    pub columns: Vec<FeatureColumn>,
}

/// Replays the full online selection over an epoch-ordered stream.
pub fn run_vtrust(batches: &[EpochBatch], capacity: usize) -> Result<(SelectionBuffer, SolverTrace)> {
    if capacity == 0 {
        return Err(SelectError::EmptyBufferCapacity);
    }
    let first = batches.first().ok_or(SelectError::EmptyStream)?;
    if batches.iter().all(|b| b.columns.is_empty()) {
        return Err(SelectError::EmptyStream);
    }
    let mut selector = OnlineSelector::new(capacity, first.target.len())?;
    for batch in batches {
        selector.set_target(batch.target.clone())?;
        for col in &batch.columns {
            selector.step(col.clone())?;
        }
    }
    Ok(selector.into_parts())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit(epoch: u32, p: usize, v: &[f64]) -> FeatureColumn {
        FeatureColumn::normalized(ColumnId::new(epoch, p), v).unwrap()
    }

    fn single_entry_state(beta: f64) -> SelectionBuffer {
        SelectionBuffer::with_coefficients(1, 2, [(unit(1, 0, &[0.0, 1.0]), beta)]).unwrap()
    }

    #[test]
    fn replaces_when_gate_holds() {
        // rho = (1, 0.2); pi = 1, pi' = 0.2, gamma = -0.2, score 0.
        let mut buf = single_entry_state(-0.2);
        assert_eq!(buf.approximation(), &[0.0, -0.2]);
        let d = data_replace(&[1.0, 0.0], &mut buf, unit(1, 1, &[1.0, 0.0])).unwrap();
        assert_eq!(d.outcome, Outcome::Replaced { evicted: ColumnId::new(1, 0) });
        assert_eq!(d.incoming_projection, Some(1.0));
        assert!(d.best_eviction_score.unwrap().abs() < 1e-15);
        assert_eq!(d.comparisons, 1);
        assert_eq!(buf.ids(), vec![ColumnId::new(1, 1)]);
    }

    #[test]
    fn positive_coefficient_blocks_replacement() {
        let mut buf = single_entry_state(0.5);
        let d = data_replace(&[1.0, 0.0], &mut buf, unit(1, 1, &[1.0, 0.0])).unwrap();
        assert_eq!(d.outcome, Outcome::Rejected);
        assert_eq!(d.best_eviction_score, None);
        assert_eq!(buf.ids(), vec![ColumnId::new(1, 0)]);
    }

    #[test]
    fn evicts_qualifier_with_largest_score() {
        // Two orthogonal entries, rho = y since coefficients are set so that
        // xi = -0.2*e2 - 0.1*e3; scores pi' + gamma.
        let e2 = unit(1, 0, &[0.0, 1.0, 0.0]);
        let e3 = unit(1, 1, &[0.0, 0.0, 1.0]);
        // y chosen so rho = (1, 0.3, 0.4): entry0 score 0.3-0.2=0.1, entry1 score 0.4-0.1=0.3
        let mut buf = SelectionBuffer::with_coefficients(2, 3, [(e2, -0.2), (e3, -0.1)]).unwrap();
        let y = [1.0, 0.3 - 0.2, 0.4 - 0.1];
        let d = data_replace(&y, &mut buf, unit(1, 2, &[1.0, 0.0, 0.0])).unwrap();
        assert_eq!(d.outcome, Outcome::Replaced { evicted: ColumnId::new(1, 1) });
        assert!((d.best_eviction_score.unwrap() - 0.3).abs() < 1e-12);
    }

    #[test]
    fn ties_evict_earliest_entry() {
        let a = unit(1, 0, &[0.0, 1.0, 0.0]);
        let b = unit(1, 1, &[0.0, 0.0, 1.0]);
        let mut buf = SelectionBuffer::with_coefficients(2, 3, [(a, -0.1), (b, -0.1)]).unwrap();
        // rho = (1, 0.2, 0.2) for both entries.
        let y = [1.0, 0.1, 0.1];
        let d = data_replace(&y, &mut buf, unit(2, 0, &[1.0, 0.0, 0.0])).unwrap();
        assert_eq!(d.outcome, Outcome::Replaced { evicted: ColumnId::new(1, 0) });
    }

    #[test]
    fn not_full_is_misuse() {
        let mut buf = SelectionBuffer::new(2, 2).unwrap();
        let err = data_replace(&[1.0, 0.0], &mut buf, unit(1, 0, &[1.0, 0.0])).unwrap_err();
        assert_eq!(err, SelectError::BufferNotFull { len: 0, capacity: 2 });
    }

    #[test]
    fn fill_phase_inserts_and_refits() {
        let mut buf = SelectionBuffer::new(3, 2).unwrap();
        let mut trace = SolverTrace::default();
        let d = vtrust_step(&mut buf, FeatureColumn::raw(ColumnId::new(1, 0), vec![3.0, 4.0]), &[1.0, 2.0], &mut trace)
            .unwrap();
        assert_eq!(d.outcome, Outcome::Inserted);
        assert_eq!(buf.len(), 1);
        assert!((buf.entries()[0].coefficient - (0.6 + 1.6)).abs() < 1e-12);
        assert_eq!(trace.records.len(), 1);
    }

    #[test]
    fn orthogonal_incoming_is_rejected() {
        let mut buf = SelectionBuffer::new(1, 3).unwrap();
        let mut trace = SolverTrace::default();
        let y = [1.0, 1.0, 0.0];
        vtrust_step(&mut buf, unit(1, 0, &[1.0, 0.0, 0.0]), &y, &mut trace).unwrap();
        // rho = (0, 1, 0); incoming along e3 has pi = 0.
        let d = vtrust_step(&mut buf, unit(1, 1, &[0.0, 0.0, 1.0]), &y, &mut trace).unwrap();
        assert_eq!(d.outcome, Outcome::Rejected);
        assert_eq!(d.incoming_projection, Some(0.0));
    }

    #[test]
    fn zero_column_is_skipped_with_warning() {
        let mut buf = SelectionBuffer::new(2, 2).unwrap();
        let mut trace = SolverTrace::default();
        let d = vtrust_step(&mut buf, FeatureColumn::raw(ColumnId::new(1, 0), vec![0.0, 0.0]), &[1.0, 0.0], &mut trace)
            .unwrap();
        assert_eq!(d.outcome, Outcome::Skipped);
        assert!(buf.is_empty());
        assert_eq!(trace.warnings.len(), 1);
    }

    #[test]
    fn run_vtrust_degenerate_inputs() {
        assert_eq!(run_vtrust(&[], 2).unwrap_err(), SelectError::EmptyStream);
        let batch = EpochBatch { epoch: 1, target: vec![1.0], columns: vec![unit(1, 0, &[1.0])] };
        assert_eq!(run_vtrust(std::slice::from_ref(&batch), 0).unwrap_err(), SelectError::EmptyBufferCapacity);
        let empty = EpochBatch { columns: vec![], ..batch };
        assert_eq!(run_vtrust(&[empty], 1).unwrap_err(), SelectError::EmptyStream);
    }

    #[test]
    fn run_vtrust_keeps_everything_when_capacity_covers_stream() {
        let cols = vec![unit(1, 0, &[1.0, 0.0, 0.0]), unit(1, 1, &[0.0, 1.0, 0.0]), unit(1, 2, &[1.0, 1.0, 1.0])];
        let batch = EpochBatch { epoch: 1, target: vec![1.0, 2.0, 3.0], columns: cols };
        let (buf, trace) = run_vtrust(&[batch], 3).unwrap();
        assert_eq!(buf.len(), 3);
        assert!(trace.summary().final_residual_norm < 1e-12);
    }

    #[test]
    fn stale_epoch_target_triggers_refit_even_on_rejection() {
        let mut sel = OnlineSelector::new(1, 2).unwrap();
        sel.set_target(vec![1.0, 0.0]).unwrap();
        sel.step(unit(1, 0, &[1.0, 0.0])).unwrap();
        assert!((sel.buffer().entries()[0].coefficient - 1.0).abs() < 1e-15);
        sel.set_target(vec![3.0, 0.0]).unwrap();
        // Same direction: pi equals pi', rejected, but beta follows the new target.
        let d = sel.step(unit(2, 0, &[1.0, 0.0])).unwrap();
        assert_eq!(d.outcome, Outcome::Rejected);
        assert!((sel.buffer().entries()[0].coefficient - 3.0).abs() < 1e-12);
    }
}
