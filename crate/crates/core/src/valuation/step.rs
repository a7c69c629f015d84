use super::fairness::{eo_disparity_from_losses, GroupIndex};
use super::target::{compose_target, Block, BlockKind, IncrementalValue, Layout, Pairing};
use super::{check_lambda, taylor_feature, FairnessBlock, FeatureMode, Result, ValuationError};
use crate::trainkit::{point_losses, GradientBundle, LabeledDataset, ModelState};

/// What one SGD step is worth: the exact composite increment (accumulated
/// into the target) and the feature column offered to the selector.
#[derive(Debug, Clone, PartialEq)]
pub struct StepValue {
    pub increment: IncrementalValue,
    pub feature: Vec<f64>,
}

#[derive(Debug, Clone)]
struct Losses {
    params: Vec<f64>,
    val: Vec<f64>,
    aug: Vec<f64>,
}

/// Turns `(before, after)` snapshots of each SGD step into composite values
/// for one pairing and lambda.
#[derive(Debug, Clone)]
pub struct StepValuer {
    pairing: Pairing,
    lambda: f64,
    mode: FeatureMode,
    fairness: FairnessBlock,
    validation: LabeledDataset,
    augmented: LabeledDataset,
    groups: Option<GroupIndex>,
    probe: LabeledDataset,
    /// Whether the probe starts with the validation rows.
    probe_has_val: bool,
    layout: Layout,
    cache: Option<Losses>,
}

impl StepValuer {
    pub fn new(
        pairing: Pairing,
        lambda: f64,
        mode: FeatureMode,
        validation: LabeledDataset,
        augmented: Option<LabeledDataset>,
    ) -> Result<Self> {
        Self::with_fairness_block(pairing, lambda, mode, FairnessBlock::default(), validation, augmented)
    }

    pub fn with_fairness_block(
        pairing: Pairing,
        lambda: f64,
        mode: FeatureMode,
        fairness: FairnessBlock,
        validation: LabeledDataset,
        augmented: Option<LabeledDataset>,
    ) -> Result<Self> {
        check_lambda(lambda)?;
        if validation.is_empty() {
            return Err(ValuationError::EmptyValidationSet);
        }
        let groups = if pairing.uses(BlockKind::Fairness) { Some(GroupIndex::build(&validation)?) } else { None };
        let uses_rob = pairing.uses(BlockKind::Robustness);
        let augmented = if uses_rob {
            match augmented {
                Some(a) if !a.is_empty() => a,
                _ => return Err(ValuationError::MissingAugmented(pairing)),
            }
        } else {
            LabeledDataset::default()
        };
        let probe_has_val = pairing.uses(BlockKind::Accuracy)
            || (pairing.uses(BlockKind::Fairness) && fairness == FairnessBlock::PerPoint);
        let mut probe = validation.with_rows(Vec::new());
        if probe_has_val {
            probe = probe.concat(&validation);
        }
        if uses_rob {
            probe = probe.concat(&augmented);
        }

        let (first, second) = pairing.families();
        let blocks = std::iter::once(first)
            .chain(second)
            .map(|kind| {
                let len = match kind {
                    BlockKind::Accuracy => validation.len(),
                    BlockKind::Robustness => augmented.len(),
                    BlockKind::Fairness => match fairness {
                        FairnessBlock::Scalar => 1,
                        FairnessBlock::PerPoint => validation.len(),
                    },
                };
                Block { kind, len }
            })
            .collect();
        Ok(Self {
            pairing,
            lambda,
            mode,
            fairness,
            validation,
            augmented,
            groups,
            probe,
            probe_has_val,
            layout: Layout::new(blocks),
            cache: None,
        })
    }

    pub fn pairing(&self) -> Pairing {
        self.pairing
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn mode(&self) -> FeatureMode {
        self.mode
    }

    pub fn fairness_block(&self) -> FairnessBlock {
        self.fairness
    }

    pub fn layout(&self) -> &Layout {
        &self.layout
    }

    /// Points whose gradients the Taylor feature needs: the validation rows
    /// (when a block is indexed by them) followed by the augmented rows.
    pub fn probe_set(&self) -> &LabeledDataset {
        &self.probe
    }

    pub fn needs_gradients(&self) -> bool {
        self.mode == FeatureMode::Taylor && !self.probe.is_empty()
    }

    fn losses(&self, model: &ModelState) -> Losses {
        Losses {
            params: model.params.clone(),
            val: point_losses(model, &self.validation),
            aug: point_losses(model, &self.augmented),
        }
    }

    /// Signed per-row weights whose dot product with the validation loss
    /// decreases gives the linearized disparity decrease: `+-1/|cell|` on the
    /// two cells of the label attaining the disparity, zero elsewhere.
    fn fairness_weights(&self, before: &Losses) -> Vec<f64> {
        let g = self.groups.as_ref().expect("fairness pairing builds groups");
        let mean = |y: u8, z: u8| g.cell(y, z).iter().map(|&i| before.val[i]).sum::<f64>() / g.cell(y, z).len() as f64;
        let gap = |y: u8| mean(y, 0) - mean(y, 1);
        let y = if gap(1).abs() > gap(0).abs() { 1 } else { 0 };
        let sign = if gap(y) < 0.0 { -1.0 } else { 1.0 };
        let mut w = vec![0.0; self.validation.len()];
        for (z, s) in [(0u8, sign), (1u8, -sign)] {
            let cell = g.cell(y, z);
            for &i in cell {
                w[i] = s / cell.len() as f64;
            }
        }
        w
    }

    fn block(&self, kind: BlockKind, val_dec: &[f64], aug_dec: &[f64], before: &Losses, after: &Losses) -> Vec<f64> {
        match kind {
            BlockKind::Accuracy => val_dec.to_vec(),
            BlockKind::Robustness => aug_dec.to_vec(),
            BlockKind::Fairness => match self.fairness {
                FairnessBlock::Scalar => {
                    let g = self.groups.as_ref().expect("fairness pairing builds groups");
                    vec![eo_disparity_from_losses(&before.val, g) - eo_disparity_from_losses(&after.val, g)]
                }
                FairnessBlock::PerPoint => {
                    self.fairness_weights(before).iter().zip(val_dec).map(|(w, d)| w * d).collect()
                }
            },
        }
    }

    fn compose(&self, mut parts: Vec<IncrementalValue>) -> Result<IncrementalValue> {
        let second = if parts.len() > 1 { parts.pop() } else { None };
        let first = parts.pop().expect("at least one block");
        match second {
            Some(s) => compose_target(&first, &s, self.lambda),
            None => Ok(first),
        }
    }

    /// Values one step. `bundle` must be computed at `before` over
    /// [`probe_set`](Self::probe_set) when the mode is Taylor.
    pub fn evaluate(
        &mut self,
        bundle: Option<&GradientBundle>,
        before: &ModelState,
        after: &ModelState,
        eta: f64,
    ) -> Result<StepValue> {
        let before_l = match self.cache.take() {
            Some(c) if c.params == before.params => c,
            _ => self.losses(before),
        };
        let after_l = self.losses(after);
        let diff = |b: &[f64], a: &[f64]| b.iter().zip(a).map(|(x, y)| x - y).collect::<Vec<_>>();
        let exact_val = diff(&before_l.val, &after_l.val);
        let exact_aug = diff(&before_l.aug, &after_l.aug);

        let (feat_val, feat_aug) = if self.needs_gradients() {
            let b = bundle
                .ok_or_else(|| ValuationError::InvalidPairing("Taylor features need a gradient bundle".into()))?;
            if b.val_gradients.len() != self.probe.len() {
                return Err(ValuationError::LayoutMismatch {
                    expected: format!("{} probe gradients", self.probe.len()),
                    got: format!("{}", b.val_gradients.len()),
                });
            }
            let t: Vec<f64> = taylor_feature(b, eta).into_iter().map(|v| eta * v).collect();
            let m = if self.probe_has_val { self.validation.len() } else { 0 };
            let val = if self.probe_has_val { t[..m].to_vec() } else { exact_val.clone() };
            (val, t[m..].to_vec())
        } else {
            (exact_val.clone(), exact_aug.clone())
        };

        let (first, second) = self.pairing.families();
        let kinds: Vec<BlockKind> = std::iter::once(first).chain(second).collect();
        let exact = kinds
            .iter()
            .map(|&k| IncrementalValue::single(k, self.block(k, &exact_val, &exact_aug, &before_l, &after_l)))
            .collect();
        let feature = kinds
            .iter()
            .map(|&k| IncrementalValue::single(k, self.block(k, &feat_val, &feat_aug, &before_l, &after_l)))
            .collect();
        let increment = self.compose(exact)?;
        let feature = self.compose(feature)?.values;

        self.cache = Some(after_l);
        Ok(StepValue { increment, feature })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::trainkit::{sgd_step, Example, ModelSpec};

    fn val() -> LabeledDataset {
        LabeledDataset::new(vec![
            Example::new(vec![1.0, 0.0, 0.0], 1.0).with_sensitive(0),
            Example::new(vec![1.0, 0.0, 1.0], 1.0).with_sensitive(1),
            Example::new(vec![-1.0, 1.0, 0.0], 0.0).with_sensitive(0),
            Example::new(vec![-1.0, 0.5, 1.0], 0.0).with_sensitive(1),
        ])
    }

    fn step_pair() -> (ModelState, ModelState) {
        let m = ModelState::init(ModelSpec::logistic(3), 0).unwrap();
        let after = sgd_step(&m, &Example::new(vec![0.5, -0.2, 1.0], 1.0), 0.1);
        (m, after)
    }

    #[test]
    fn layout_follows_pairing() {
        let v = StepValuer::new(Pairing::AccuracyFairness, 0.5, FeatureMode::Exact, val(), None).unwrap();
        assert_eq!(v.layout().dim(), 5);
        assert_eq!(v.probe_set().len(), 4);
        let r = StepValuer::new(Pairing::RobustnessFairness, 0.5, FeatureMode::Taylor, val(), Some(val())).unwrap();
        assert_eq!(r.layout().range(BlockKind::Fairness), Some(4..5));
    }

    #[test]
    fn robustness_needs_augmented_set() {
        let e = StepValuer::new(Pairing::AccuracyRobustness, 0.5, FeatureMode::Exact, val(), None).unwrap_err();
        assert_eq!(e, ValuationError::MissingAugmented(Pairing::AccuracyRobustness));
    }

    #[test]
    fn exact_mode_feature_equals_increment() {
        let (b, a) = step_pair();
        let mut v = StepValuer::new(Pairing::AccuracyFairness, 0.3, FeatureMode::Exact, val(), None).unwrap();
        let s = v.evaluate(None, &b, &a, 0.1).unwrap();
        assert_eq!(s.feature, s.increment.values);
        let acc = crate::valuation::incremental_value_exact(&b, &a, &val()).unwrap();
        for j in 0..4 {
            assert!((s.increment.values[j] - 0.3 * acc.values[j]).abs() < 1e-15);
        }
        let fair = crate::valuation::fairness_increment(&b, &a, &val()).unwrap();
        assert!((s.increment.values[4] - 0.7 * fair.values[0]).abs() < 1e-15);
    }

    #[test]
    fn taylor_mode_keeps_exact_fairness() {
        let (b, a) = step_pair();
        let mut v = StepValuer::new(Pairing::AccuracyFairness, 0.5, FeatureMode::Taylor, val(), None).unwrap();
        let bundle = GradientBundle::compute(&b, &Example::new(vec![0.5, -0.2, 1.0], 1.0), v.probe_set());
        let s = v.evaluate(Some(&bundle), &b, &a, 0.1).unwrap();
        assert_eq!(s.feature[4], s.increment.values[4]);
        for j in 0..4 {
            // agrees to leading order at a small step
            assert!((s.feature[j] - s.increment.values[j]).abs() < 0.1 * s.increment.values[j].abs() + 1e-4, "{:?} vs {:?}", s.feature, s.increment.values);
        }
    }

    #[test]
    fn lambda_one_zeroes_fairness_coordinate() {
        let (b, a) = step_pair();
        let mut v = StepValuer::new(Pairing::AccuracyFairness, 1.0, FeatureMode::Exact, val(), None).unwrap();
        let s = v.evaluate(None, &b, &a, 0.1).unwrap();
        assert_eq!(s.feature[4], 0.0);
        assert_eq!(s.increment.values[4], 0.0);
    }

    #[test]
    fn per_point_fairness_sums_to_linearized_disparity_change() {
        // away from zero disparity, where the max has a kink
        let b = ModelState::from_params(ModelSpec::logistic(3), vec![0.3, -0.2, 0.5, 0.1]).unwrap();
        let a = sgd_step(&b, &Example::new(vec![0.5, -0.2, 1.0], 1.0), 0.1);
        let mut v = StepValuer::with_fairness_block(
            Pairing::AccuracyFairness,
            0.0,
            FeatureMode::Exact,
            FairnessBlock::PerPoint,
            val(),
            None,
        )
        .unwrap();
        assert_eq!(v.layout().dim(), 8);
        let s = v.evaluate(None, &b, &a, 0.1).unwrap();
        let total: f64 = s.increment.values[4..].iter().sum();
        let exact = crate::valuation::fairness_increment(&b, &a, &val()).unwrap().values[0];
        // same maximizing label on both sides of this small step
        assert!((total - exact).abs() < 1e-12, "{total} vs {exact}");
    }
}
