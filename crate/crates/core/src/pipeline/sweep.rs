use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::report::{run_id, write_csv_rows, write_json, SCHEMA_VERSION};
use super::{select_report, PipelineError, Result, RunConfig};
use crate::metrics::{pareto_frontier, MetricReport, ParetoPoint};
use crate::valuation::{BlockKind, Pairing};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRun {
    pub lambda: f64,
    pub run_id: String,
    pub metrics: Option<MetricReport>,
    /// Set when this lambda failed; the sweep carries on.
    pub error: Option<String>,
    pub csv_row: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub schema_version: u32,
    pub run_id: String,
    pub config: RunConfig,
    pub runs: Vec<SweepRun>,
    /// `(error-type metric, disparity-type metric)` per successful lambda.
    pub points: Vec<ParetoPoint>,
    pub frontier: Vec<ParetoPoint>,
    pub wall_ms: u64,
}

/// The two axes a pairing trades off, both lower-is-better.
pub(crate) fn pareto_axes(pairing: Pairing, m: &MetricReport) -> Option<(f64, f64)> {
    let robust_error = m.ra.map(|a| 1.0 - a);
    match pairing.families() {
        (BlockKind::Robustness, _) => Some((robust_error?, m.eo_disp?)),
        (_, Some(BlockKind::Robustness)) => Some((m.er, robust_error?)),
        _ => Some((m.er, m.eo_disp.unwrap_or(0.0))),
    }
}

/// One selection run per lambda in `config.sweep.lambdas`.
pub fn sweep_report(config: &RunConfig) -> Result<SweepReport> {
    config.validate()?;
    let started = Instant::now();
    let mut runs = Vec::new();
    let mut points = Vec::new();
    for &lambda in &config.sweep.lambdas {
        let c = config.with_lambda(lambda);
        match select_report(&c) {
            Ok(r) => {
                if let Some((x, y)) = pareto_axes(c.pairing, &r.metrics) {
                    points.push(ParetoPoint::new(lambda, x, y));
                }
                runs.push(SweepRun {
                    lambda,
                    run_id: r.run_id.clone(),
                    csv_row: Some(r.csv_row()),
                    metrics: Some(r.metrics),
                    error: None,
                });
            }
            Err(e @ PipelineError::Config(_)) => return Err(e),
            Err(e) => runs.push(SweepRun {
                lambda,
                run_id: run_id("select", &c),
                metrics: None,
                error: Some(e.to_string()),
                csv_row: None,
            }),
        }
    }
    let frontier = pareto_frontier(&points);
    Ok(SweepReport {
        schema_version: SCHEMA_VERSION,
        run_id: run_id("sweep", config),
        config: config.clone(),
        runs,
        points,
        frontier,
        wall_ms: started.elapsed().as_millis() as u64,
    })
}

/// Runs the sweep and writes the report JSON plus one CSV row per lambda.
pub fn cmd_sweep(config: &RunConfig) -> Result<SweepReport> {
    let report = sweep_report(config)?;
    let dir = &config.out_dir;
    write_json(&dir.join(format!("{}.json", report.run_id)), &report)?;
    let rows: Vec<String> = report.runs.iter().filter_map(|r| r.csv_row.clone()).collect();
    write_csv_rows(&dir.join(format!("{}.csv", report.run_id)), &rows)?;
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_lambda_frontier_is_that_point() {
        let mut c = RunConfig::synthetic(120, 2, 0.8).with_fraction(0.3);
        c.sgd.epochs = 1;
        c.sweep.lambdas = vec![0.4];
        let r = sweep_report(&c).unwrap();
        assert_eq!(r.runs.len(), 1);
        assert_eq!(r.frontier, r.points);
        assert_eq!(r.frontier[0].lambda, 0.4);
    }
}
