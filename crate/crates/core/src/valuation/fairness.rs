use super::{Result, ValuationError};
use crate::trainkit::{point_losses, LabeledDataset, ModelState};

/// Row indices of the four (label, sensitive) cells of a dataset.
#[derive(Debug, Clone, PartialEq)]
pub struct GroupIndex {
    /// `cells[y][z]`
    cells: [[Vec<usize>; 2]; 2],
}

impl GroupIndex {
    /// Fails if any row lacks a sensitive attribute or any cell is empty.
    pub fn build(data: &LabeledDataset) -> Result<Self> {
        if data.is_empty() {
            return Err(ValuationError::EmptyValidationSet);
        }
        let mut cells: [[Vec<usize>; 2]; 2] = Default::default();
        for (i, r) in data.rows.iter().enumerate() {
            let z = r.sensitive.ok_or(ValuationError::MissingSensitive(i))?;
            cells[usize::from(r.class())][usize::from(z.min(1))].push(i);
        }
        for y in 0..2u8 {
            for z in 0..2u8 {
                if cells[usize::from(y)][usize::from(z)].is_empty() {
                    return Err(ValuationError::EmptyGroup { y, z });
                }
            }
        }
        Ok(Self { cells })
    }

    pub fn cell(&self, y: u8, z: u8) -> &[usize] {
        &self.cells[usize::from(y)][usize::from(z)]
    }

    fn mean(&self, losses: &[f64], y: u8, z: u8) -> f64 {
        let idx = self.cell(y, z);
        idx.iter().map(|&i| losses[i]).sum::<f64>() / idx.len() as f64
    }
}

/// Equalized-odds disparity from precomputed per-row losses:
/// `max_y |mean loss(y, z=0) - mean loss(y, z=1)|`.
pub fn eo_disparity_from_losses(losses: &[f64], groups: &GroupIndex) -> f64 {
    (0..2u8).map(|y| (groups.mean(losses, y, 0) - groups.mean(losses, y, 1)).abs()).fold(0.0, f64::max)
}

/// Equalized-odds disparity of `model` on `valset`, using mean group losses.
pub fn eo_disparity(model: &ModelState, valset: &LabeledDataset) -> Result<f64> {
    let groups = GroupIndex::build(valset)?;
    Ok(eo_disparity_from_losses(&point_losses(model, valset), &groups))
}

/// Demographic-parity disparity: `|P(yhat=1 | z=0) - P(yhat=1 | z=1)|` at
/// threshold 0.5.
pub fn dp_disparity(model: &ModelState, valset: &LabeledDataset) -> Result<f64> {
    let mut positives = [0usize; 2];
    let mut counts = [0usize; 2];
    for (i, r) in valset.rows.iter().enumerate() {
        let z = usize::from(r.sensitive.ok_or(ValuationError::MissingSensitive(i))?.min(1));
        counts[z] += 1;
        positives[z] += usize::from(model.predict_class(&r.features));
    }
    for z in 0..2 {
        if counts[z] == 0 {
            return Err(ValuationError::EmptySensitiveGroup(z as u8));
        }
    }
    let rate = |z: usize| positives[z] as f64 / counts[z] as f64;
    Ok((rate(0) - rate(1)).abs())
}
