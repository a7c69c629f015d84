use std::collections::HashSet;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::report::{run_id, write_json, SCHEMA_VERSION};
use super::{Result, RunConfig};
use crate::linalg::{axpy, least_squares, norm, sub};
use crate::select::{
    batch_omp, check_eviction_rule, data_replace, predict_eviction, run_vtrust, ColumnId, EpochBatch, FeatureColumn, SelectionBuffer,
};
use crate::synth::{gen_sparse_instance, SparseInstance};

/// Residual tolerance of the full-budget equivalence check.
pub const DEGENERATE_TOL: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DegenerateCheck {
    pub n: usize,
    pub d: usize,
    /// Largest coordinate gap between the online and full least-squares residuals.
    pub max_residual_gap: f64,
    pub elapsed_ms: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecoveryCase {
    pub seed: u64,
    pub planted: Vec<usize>,
    pub brute_force: Vec<usize>,
    pub online: Vec<usize>,
    pub omp: Vec<usize>,
    pub online_matches: bool,
    pub omp_matches: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecoveryCheck {
    pub cases: Vec<RecoveryCase>,
    pub online_matches: usize,
    pub omp_matches: usize,
    /// Instances that could not be generated under the coherence cap.
    pub generation_failures: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TheoremCheck {
    /// States on which the premises held and were checked.
    pub states: usize,
    /// Constructed states discarded because the premises failed.
    pub discarded: usize,
    pub mismatches: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleReport {
    pub schema_version: u32,
    pub run_id: String,
    pub config: RunConfig,
    pub degenerate: DegenerateCheck,
    pub recovery: RecoveryCheck,
    pub theorem: TheoremCheck,
    /// Same construction with every coefficient's sign flipped before the
    /// replacement runs; a sound check must report mismatches here.
    pub negative_control: TheoremCheck,
    pub wall_ms: u64,
}

impl OracleReport {
    pub fn all_pass(&self) -> bool {
        self.degenerate.pass
            && self.recovery.online_matches == self.recovery.cases.len()
            && self.recovery.generation_failures.is_empty()
            && self.theorem.mismatches == 0
            && self.negative_control.mismatches > 0
    }
}

fn columns_of(inst: &SparseInstance) -> Vec<FeatureColumn> {
    inst.columns.iter().enumerate().map(|(i, c)| FeatureColumn::raw(ColumnId::new(1, i), c.clone())).collect()
}

/// One epoch, all columns in index order, against the instance target.
fn online_support(inst: &SparseInstance, capacity: usize) -> Result<(SelectionBuffer, Vec<usize>)> {
    let batch = EpochBatch { epoch: 1, target: inst.target.clone(), columns: columns_of(inst) };
    let (buffer, _) = run_vtrust(std::slice::from_ref(&batch), capacity)?;
    let mut support: Vec<usize> = buffer.entries().iter().map(|e| e.id.datapoint).collect();
    support.sort_unstable();
    Ok((buffer, support))
}

fn residual_norm(inst: &SparseInstance, support: &[usize]) -> f64 {
    let cols: Vec<&[f64]> = support.iter().map(|&i| inst.columns[i].as_slice()).collect();
    let (beta, _) = least_squares(&cols, &inst.target);
    let mut approx = vec![0.0; inst.dim()];
    for (c, b) in cols.iter().zip(&beta) {
        axpy(&mut approx, *b, c);
    }
    norm(&sub(&inst.target, &approx))
}

/// Exhaustive best `k`-subset by least-squares residual; lexicographically
/// first on ties.
pub fn brute_force_support(inst: &SparseInstance, k: usize) -> Vec<usize> {
    let n = inst.n();
    let mut idx: Vec<usize> = (0..k).collect();
    let mut best = (f64::INFINITY, idx.clone());
    if k > n {
        return Vec::new();
    }
    loop {
        let r = residual_norm(inst, &idx);
        if r < best.0 {
            best = (r, idx.clone());
        }
        // next combination
        let Some(i) = (0..k).rev().find(|&i| idx[i] < n - k + i) else { break };
        idx[i] += 1;
        for j in i + 1..k {
            idx[j] = idx[j - 1] + 1;
        }
    }
    best.1
}

fn degenerate_check(seed: u64) -> Result<DegenerateCheck> {
    let (n, d) = (50, 60);
    let inst = gen_sparse_instance(n, d, 5, 0.1, 0.5, seed)?;
    let started = Instant::now();
    let (buffer, _) = online_support(&inst, n)?;
    let elapsed_ms = started.elapsed().as_secs_f64() * 1e3;
    let online = buffer.residual(&inst.target)?;
    let cols: Vec<&[f64]> = inst.columns.iter().map(Vec::as_slice).collect();
    let (beta, _) = least_squares(&cols, &inst.target);
    let mut full = inst.target.clone();
    for (c, b) in cols.iter().zip(&beta) {
        axpy(&mut full, -b, c);
    }
    let gap = online.iter().zip(&full).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    Ok(DegenerateCheck { n, d, max_residual_gap: gap, elapsed_ms, pass: gap <= DEGENERATE_TOL })
}

fn recovery_check(config: &RunConfig) -> Result<RecoveryCheck> {
    let o = &config.oracle;
    let mut cases = Vec::new();
    let mut generation_failures = Vec::new();
    for s in 0..o.seeds {
        let seed = config.seed.wrapping_add(s);
        let inst = match gen_sparse_instance(o.n, o.d, o.k, 0.0, o.coherence_cap, seed) {
            Ok(i) => i,
            Err(e) => {
                generation_failures.push(format!("seed {seed}: {e}"));
                continue;
            }
        };
        let brute_force = brute_force_support(&inst, o.k);
        let (_, online) = online_support(&inst, o.k)?;
        let mut omp = batch_omp(&columns_of(&inst), &inst.target, o.k)?.support;
        omp.sort_unstable();
        cases.push(RecoveryCase {
            seed,
            planted: inst.true_support.clone(),
            online_matches: online == brute_force,
            omp_matches: omp == brute_force,
            brute_force,
            online,
            omp,
        });
    }
    Ok(RecoveryCheck {
        online_matches: cases.iter().filter(|c| c.online_matches).count(),
        omp_matches: cases.iter().filter(|c| c.omp_matches).count(),
        cases,
        generation_failures,
    })
}

fn unit_gaussian(rng: &mut ChaCha8Rng, d: usize) -> Vec<f64> {
    let v: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();
    let n = norm(&v);
    v.into_iter().map(|x| x / n).collect()
}

/// A full buffer whose optimal entries carry positive coefficients and whose
/// other entries carry negative ones, a residual, and a candidate aligned
/// with that residual.
pub struct TheoremState {
    pub buffer: SelectionBuffer,
    pub residual: Vec<f64>,
    pub candidate: FeatureColumn,
    pub optimal: HashSet<ColumnId>,
}

pub fn theorem_state(rng: &mut ChaCha8Rng, capacity: usize, dim: usize) -> TheoremState {
    let mut optimal = HashSet::new();
    let mut entries = Vec::with_capacity(capacity);
    let non_optimal_slot = rng.random_range(0..capacity);
    for p in 0..capacity {
        let id = ColumnId::new(1, p);
        let is_optimal = p != non_optimal_slot && rng.random_bool(0.5);
        let beta = if is_optimal {
            optimal.insert(id);
            rng.random_range(0.1..1.0)
        } else {
            -rng.random_range(0.05..1.0)
        };
        entries.push((FeatureColumn::raw(id, unit_gaussian(rng, dim)), beta));
    }
    let buffer = SelectionBuffer::with_coefficients(capacity, dim, entries).expect("valid state");
    let residual: Vec<f64> = (0..dim).map(|_| rng.sample(StandardNormal)).collect();
    let noisy: Vec<f64> = residual.iter().map(|r| r + 0.05 * rng.sample::<f64, _>(StandardNormal)).collect();
    let candidate = FeatureColumn::normalized(ColumnId::new(1, capacity), &noisy).expect("non-zero");
    TheoremState { buffer, residual, candidate, optimal }
}

fn theorem_check(config: &RunConfig, corrupt: bool) -> Result<TheoremCheck> {
    let wanted = config.oracle.theorem_states;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed ^ 0x7E0_0000);
    let (mut states, mut discarded, mut mismatches) = (0, 0, 0);
    while states < wanted && discarded < 100 * wanted.max(1) {
        let st = theorem_state(&mut rng, 6, config.oracle.d);
        let report = if corrupt {
            let mut r = predict_eviction(&st.residual, &st.candidate, &st.buffer, &st.optimal)?;
            let mut target = st.buffer.approximation().to_vec();
            axpy(&mut target, 1.0, &st.residual);
            let flipped = SelectionBuffer::with_coefficients(
                st.buffer.capacity(),
                st.buffer.dim(),
                st.buffer.entries().iter().map(|e| (e.column.clone(), -e.coefficient)),
            )?;
            let mut copy = flipped;
            r.actual = Some(data_replace(&target, &mut copy, st.candidate.clone())?.outcome);
            r
        } else {
            check_eviction_rule(&st.residual, &st.candidate, &st.buffer, &st.optimal)?
        };
        match report.consistent() {
            Some(ok) => {
                states += 1;
                mismatches += usize::from(!ok);
            }
            None => discarded += 1,
        }
    }
    Ok(TheoremCheck { states, discarded, mismatches })
}

/// Runs the synthetic oracle suites. Suite failures are report content, not
/// errors.
pub fn oracle_report(config: &RunConfig) -> Result<OracleReport> {
    config.validate()?;
    let started = Instant::now();
    Ok(OracleReport {
        schema_version: SCHEMA_VERSION,
        run_id: run_id("oracle-check", config),
        config: config.clone(),
        degenerate: degenerate_check(config.seed)?,
        recovery: recovery_check(config)?,
        theorem: theorem_check(config, false)?,
        negative_control: theorem_check(config, true)?,
        wall_ms: started.elapsed().as_millis() as u64,
    })
}

pub fn cmd_oracle_check(config: &RunConfig) -> Result<OracleReport> {
    let report = oracle_report(config)?;
    write_json(&config.out_dir.join(format!("{}.json", report.run_id)), &report)?;
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn brute_force_finds_planted_support_without_noise() {
        let inst = gen_sparse_instance(8, 12, 2, 0.0, 0.5, 3).unwrap();
        assert_eq!(brute_force_support(&inst, 2), inst.true_support);
    }

    #[test]
    fn constructed_states_satisfy_premises() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..20 {
            let st = theorem_state(&mut rng, 6, 30);
            let r = predict_eviction(&st.residual, &st.candidate, &st.buffer, &st.optimal).unwrap();
            assert!(r.premises_hold());
        }
    }

    #[test]
    fn negative_control_is_detected() {
        let mut c = RunConfig::synthetic(100, 2, 0.5);
        c.oracle.theorem_states = 20;
        let honest = theorem_check(&c, false).unwrap();
        let corrupt = theorem_check(&c, true).unwrap();
        assert_eq!(honest.mismatches, 0);
        assert!(corrupt.mismatches > 0);
    }
}
