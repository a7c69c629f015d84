use proptest::prelude::*;

use vtrust::augment::{sampling_number_init, CorruptionMatrix};
use vtrust::metrics::{cf_gap, pareto_frontier, ParetoPoint};
use vtrust::select::{data_replace, run_vtrust, ColumnId, EpochBatch, FeatureColumn, Outcome, SelectionBuffer};
use vtrust::synth::{parse_csv, to_csv, CsvSchema};
use vtrust::trainkit::{Example, LabeledDataset, ModelSpec, ModelState};
use vtrust::valuation::{compose_target, cumulative_target, eo_disparity, BlockKind, IncrementalValue};

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn vec_of(d: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-1.0f64..1.0, d)
}

fn nonzero(v: &[f64]) -> bool {
    dot(v, v) > 1e-6
}

/// A full buffer of `cap` columns in `d` dimensions with arbitrary
/// coefficients, a target and an incoming column.
fn state() -> impl Strategy<Value = (Vec<Vec<f64>>, Vec<f64>, Vec<f64>, Vec<f64>)> {
    (1usize..6, 2usize..10).prop_flat_map(|(cap, extra)| {
        let d = cap + extra;
        (
            prop::collection::vec(vec_of(d).prop_filter("zero", |v| nonzero(v)), cap),
            prop::collection::vec(-1.5f64..1.5, cap),
            vec_of(d),
            vec_of(d).prop_filter("zero", |v| nonzero(v)),
        )
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn evicted_entry_passes_the_gate_and_scores_highest((cols, betas, y, z) in state()) {
        let cap = cols.len();
        let d = y.len();
        let entries = cols.iter().zip(&betas).enumerate().map(|(p, (c, &b))| {
            (FeatureColumn::normalized(ColumnId::new(1, p), c).unwrap(), b)
        });
        let buffer = SelectionBuffer::with_coefficients(cap, d, entries).unwrap();
        let rho: Vec<f64> = y.iter().zip(buffer.approximation()).map(|(a, b)| a - b).collect();
        let incoming = FeatureColumn::normalized(ColumnId::new(1, cap), &z).unwrap();
        let pi = dot(&incoming.values, &rho).abs();
        let margin = SelectionBuffer::DEFAULT_PROJECTION_FLOOR * dot(&y, &y).sqrt();
        let qualifying: Vec<(ColumnId, f64)> = buffer
            .entries()
            .iter()
            .filter_map(|e| {
                let pp = dot(&e.column.values, &rho).abs();
                (pi > pp + margin && e.coefficient <= 0.0).then_some((e.id, pp + e.coefficient))
            })
            .collect();
        let mut copy = buffer.clone();
        let decision = data_replace(&y, &mut copy, incoming.clone()).unwrap();
        prop_assert_eq!(decision.comparisons, cap);
        match decision.outcome {
            Outcome::Replaced { evicted } => {
                let best = qualifying.iter().map(|q| q.1).fold(f64::NEG_INFINITY, f64::max);
                let score = qualifying.iter().find(|q| q.0 == evicted).map(|q| q.1);
                prop_assert!(score.is_some());
                prop_assert!(score.unwrap() >= best - 1e-12);
                prop_assert!(copy.contains(incoming.id) && !copy.contains(evicted));
                prop_assert_eq!(copy.len(), cap);
            }
            Outcome::Rejected => {
                prop_assert!(qualifying.is_empty());
                prop_assert_eq!(copy.entries(), buffer.entries());
            }
            other => prop_assert!(false, "unexpected {:?}", other),
        }
    }

    #[test]
    fn selection_never_exceeds_capacity_and_holds_unit_columns(
        cap in 1usize..6,
        cols in prop::collection::vec(vec_of(8), 1..25),
        y in vec_of(8),
    ) {
        let batch = EpochBatch {
            epoch: 1,
            target: y,
            columns: cols.iter().enumerate().map(|(i, c)| FeatureColumn::raw(ColumnId::new(1, i), c.clone())).collect(),
        };
        let (buffer, trace) = run_vtrust(&[batch], cap).unwrap();
        prop_assert!(buffer.len() <= cap);
        let s = trace.summary();
        prop_assert_eq!(s.steps, cols.len());
        prop_assert_eq!(s.inserted + s.replaced + s.rejected + s.skipped, s.steps);
        for e in buffer.entries() {
            prop_assert!((dot(&e.column.values, &e.column.values) - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn frontier_is_idempotent_and_dominates_the_rest(
        raw in prop::collection::vec((0.0f64..1.0, 0.0f64..1.0, 0.0f64..1.0), 0..30)
    ) {
        let pts: Vec<ParetoPoint> = raw.iter().map(|&(l, x, y)| ParetoPoint::new(l, x, y)).collect();
        let front = pareto_frontier(&pts);
        prop_assert_eq!(pareto_frontier(&front), front.clone());
        for p in &front {
            prop_assert!(!pts.iter().any(|q| q.dominates(p)));
        }
        for p in &pts {
            let on = front.contains(p);
            prop_assert!(on || front.iter().any(|f| f.dominates(p)) || front.iter().any(|f| f.metric_x == p.metric_x && f.metric_y == p.metric_y));
        }
    }

    #[test]
    fn composition_scales_each_block(
        a in vec_of(5),
        b in vec_of(1),
        lambda in 0.0f64..=1.0,
    ) {
        let acc = IncrementalValue::single(BlockKind::Accuracy, a.clone());
        let fair = IncrementalValue::single(BlockKind::Fairness, b.clone());
        let c = compose_target(&acc, &fair, lambda).unwrap();
        prop_assert_eq!(c.values.len(), 6);
        for (i, v) in a.iter().enumerate() {
            prop_assert_eq!(c.values[i], lambda * v);
        }
        prop_assert_eq!(c.values[5], (1.0 - lambda) * b[0]);
    }

    #[test]
    fn cumulative_target_is_additive(
        incs in prop::collection::vec(vec_of(4), 1..12),
        split in 0usize..12,
    ) {
        let values: Vec<IncrementalValue> =
            incs.iter().map(|v| IncrementalValue::single(BlockKind::Accuracy, v.clone())).collect();
        let total = cumulative_target(&values, 1.0).unwrap();
        let k = split.min(values.len() - 1).max(1).min(values.len());
        let left = cumulative_target(&values[..k], 1.0).unwrap();
        for i in 0..4 {
            let right: f64 = values[k..].iter().map(|v| v.values[i]).sum();
            prop_assert!((total.values[i] - (left.values[i] + right)).abs() < 1e-12);
        }
    }

    #[test]
    fn sampling_fractions_are_a_distribution(
        rows in (1usize..5).prop_flat_map(|k| prop::collection::vec(prop::collection::vec(0.05f64..1.0, k), k + 1))
    ) {
        let mat = CorruptionMatrix { values: rows };
        let state = sampling_number_init(&mat).unwrap();
        match state.fractions() {
            Ok(f) => {
                prop_assert!(f.iter().all(|&x| x >= 0.0));
                prop_assert!((f.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            }
            Err(_) => prop_assert!(state.sn.iter().all(|&s| s <= 0.0)),
        }
    }

    #[test]
    fn csv_round_trips(
        rows in prop::collection::vec((vec_of(3), 0u8..2, 0u8..2), 1..30)
    ) {
        let mut data = LabeledDataset::new(
            rows.iter()
                .map(|(x, y, z)| {
                    let mut f = x.clone();
                    f.push(*z as f64);
                    Example::new(f, *y as f64).with_sensitive(*z)
                })
                .collect(),
        );
        data.feature_names[3] = "z".into();
        data.sensitive_feature = Some(3);
        let text = to_csv(&data);
        prop_assert!(!text.contains('"'));
        let back = parse_csv(&text, &CsvSchema::for_dataset(&data)).unwrap();
        prop_assert_eq!(back, data);
    }

    #[test]
    fn eo_disparity_ignores_which_group_is_called_zero(
        params in vec_of(4),
        rows in prop::collection::vec((vec_of(3), 0u8..2, 0u8..2), 8..40),
    ) {
        let mut rows = rows;
        // every (y, z) cell non-empty
        for (i, (y, z)) in [(0, 0), (0, 1), (1, 0), (1, 1)].into_iter().enumerate() {
            rows[i].1 = y;
            rows[i].2 = z;
        }
        let model = ModelState::from_params(ModelSpec::logistic(3), params).unwrap();
        let make = |swap: bool| LabeledDataset::new(
            rows.iter().map(|(x, y, z)| Example::new(x.clone(), *y as f64).with_sensitive(if swap { 1 - z } else { *z })).collect(),
        );
        let a = eo_disparity(&model, &make(false)).unwrap();
        let b = eo_disparity(&model, &make(true)).unwrap();
        prop_assert!((a - b).abs() < 1e-12);
        prop_assert!(a >= 0.0);
    }

    #[test]
    fn counterfactual_gap_is_symmetric_under_the_toggle(
        params in vec_of(4),
        x in vec_of(2),
        z in 0u8..2,
        y in 0u8..2,
    ) {
        let model = ModelState::from_params(ModelSpec::logistic(3), params).unwrap();
        let point = Example::new(vec![x[0], x[1], z as f64], y as f64);
        let toggled = Example::new(vec![x[0], x[1], (1 - z) as f64], y as f64);
        let a = cf_gap(&model, &point, Some(2)).unwrap();
        let b = cf_gap(&model, &toggled, Some(2)).unwrap();
        prop_assert!((a - b).abs() < 1e-15);
        prop_assert!((0.0..=1.0).contains(&a));
    }
}
