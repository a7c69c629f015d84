use serde::{Deserialize, Serialize};

use super::{ColumnId, Outcome};

/// One `vtrust_step` call.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TraceRecord {
    pub step: usize,
    pub id: ColumnId,
    pub outcome: Outcome,
    pub incoming_projection: Option<f64>,
    pub best_eviction_score: Option<f64>,
    /// `||y - xi||` after the step (after the refit, if one ran).
    pub residual_norm: f64,
    /// Buffered columns examined by the replacement scan.
    pub comparisons: usize,
    pub rank_deficient: bool,
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct SolverTrace {
    pub records: Vec<TraceRecord>,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TraceSummary {
    pub steps: usize,
    pub inserted: usize,
    pub replaced: usize,
    pub rejected: usize,
    pub skipped: usize,
    pub total_comparisons: usize,
    pub rank_deficient_steps: usize,
    pub final_residual_norm: f64,
    pub warnings: usize,
}

impl SolverTrace {
    pub fn comparisons_in_epoch(&self, epoch: u32) -> usize {
        self.records.iter().filter(|r| r.id.epoch == epoch).map(|r| r.comparisons).sum()
    }

    pub fn summary(&self) -> TraceSummary {
        let mut s = TraceSummary { steps: self.records.len(), warnings: self.warnings.len(), ..Default::default() };
        for r in &self.records {
            match r.outcome {
                Outcome::Inserted => s.inserted += 1,
                Outcome::Replaced { .. } => s.replaced += 1,
                Outcome::Rejected => s.rejected += 1,
                Outcome::Skipped => s.skipped += 1,
            }
            s.total_comparisons += r.comparisons;
            s.rank_deficient_steps += usize::from(r.rank_deficient);
        }
        s.final_residual_norm = self
            .records
            .iter()
            .rev()
            .find(|r| r.outcome != Outcome::Skipped)
            .map_or(0.0, |r| r.residual_norm);
        s
    }
}
