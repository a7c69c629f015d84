use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::config::higher_is_better;
use super::report::{run_id, write_json, SCHEMA_VERSION};
use super::{select_report, ConfigError, PipelineError, Result, RunConfig};
use crate::metrics::MetricReport;

/// Grid step of the lambda bisection.
pub const LAMBDA_RESOLUTION: f64 = 1.0 / 64.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridPoint {
    pub fraction: f64,
    pub first: f64,
    pub second: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LambdaProbe {
    pub lambda: f64,
    pub first: f64,
    pub second: f64,
    pub feasible: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchReport {
    pub schema_version: u32,
    pub run_id: String,
    pub config: RunConfig,
    pub target_metric: String,
    pub second_metric: String,
    pub threshold: f64,
    /// First and second metric at lambda = 1 per fraction.
    pub grid: Vec<GridPoint>,
    pub fraction: f64,
    /// Bisection probes in order; the lambda = 1 endpoint comes from the grid.
    pub probes: Vec<LambdaProbe>,
    pub lambda: f64,
    pub first: f64,
    pub second: f64,
    /// The probe history was not monotone in lambda, so the monotonicity the
    /// bisection relies on did not hold on this instance.
    pub non_monotone: bool,
    pub wall_ms: u64,
}

fn metric(m: &MetricReport, name: &str) -> Result<f64> {
    m.get(name).ok_or_else(|| {
        PipelineError::Config(ConfigError::new("search.target_metric", format!("metric '{name}' is not available for this run")))
    })
}

fn meets(value: f64, threshold: f64, name: &str) -> bool {
    if higher_is_better(name) {
        value >= threshold
    } else {
        value <= threshold
    }
}

fn better(a: f64, b: f64, name: &str) -> bool {
    if higher_is_better(name) {
        a > b
    } else {
        a < b
    }
}

/// Grid search over selection fractions at lambda = 1, keeping the fraction
/// with the best first metric; then bisection on the 1/64 lambda grid for the
/// smallest lambda whose first metric still meets the threshold (lambda
/// weights the first value function, so lowering it favours the second).
pub fn search_report(config: &RunConfig) -> Result<SearchReport> {
    config.validate()?;
    let search = config
        .search
        .clone()
        .ok_or_else(|| ConfigError::new("search", "the search command needs a 'search' section"))?;
    let started = Instant::now();
    let (first_name, second_name) = (search.target_metric.clone(), search.second(config.pairing));
    let evaluate = |c: &RunConfig| -> Result<(f64, f64)> {
        let r = select_report(c)?;
        Ok((metric(&r.metrics, &first_name)?, metric(&r.metrics, &second_name)?))
    };

    let mut grid = Vec::new();
    for &f in &search.fractions {
        let (first, second) = evaluate(&config.with_fraction(f).with_lambda(1.0))?;
        grid.push(GridPoint { fraction: f, first, second });
    }
    let best = grid
        .iter()
        .fold(None::<&GridPoint>, |acc, g| match acc {
            Some(a) if !better(g.first, a.first, &first_name) => Some(a),
            _ => Some(g),
        })
        .cloned()
        .expect("fractions are non-empty");
    if !meets(best.first, search.threshold, &first_name) {
        return Err(PipelineError::ThresholdUnreachable {
            metric: first_name,
            threshold: search.threshold,
            best: best.first,
        });
    }
    let base = config.with_fraction(best.fraction);
    let (mut lo, mut hi) = (0usize, 64usize);
    let (mut first, mut second) = (best.first, best.second);
    let mut probes = Vec::new();
    while hi - lo > 1 {
        let mid = (lo + hi) / 2;
        let lambda = mid as f64 * LAMBDA_RESOLUTION;
        let (f, s) = evaluate(&base.with_lambda(lambda))?;
        let feasible = meets(f, search.threshold, &first_name);
        probes.push(LambdaProbe { lambda, first: f, second: s, feasible });
        if feasible {
            hi = mid;
            first = f;
            second = s;
        } else {
            lo = mid;
        }
    }
    let mut by_lambda: Vec<&LambdaProbe> = probes.iter().collect();
    by_lambda.sort_by(|a, b| a.lambda.total_cmp(&b.lambda));
    let non_monotone = by_lambda.windows(2).any(|w| w[0].feasible && !w[1].feasible);
    Ok(SearchReport {
        schema_version: SCHEMA_VERSION,
        run_id: run_id("search", config),
        config: config.clone(),
        target_metric: first_name,
        second_metric: second_name,
        threshold: search.threshold,
        grid,
        fraction: best.fraction,
        probes,
        lambda: hi as f64 * LAMBDA_RESOLUTION,
        first,
        second,
        non_monotone,
        wall_ms: started.elapsed().as_millis() as u64,
    })
}

/// Runs the search and writes its report.
pub fn cmd_search(config: &RunConfig) -> Result<SearchReport> {
    let report = search_report(config)?;
    write_json(&config.out_dir.join(format!("{}.json", report.run_id)), &report)?;
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pipeline::SearchConfig;

    fn cfg(threshold: f64) -> RunConfig {
        let mut c = RunConfig::synthetic(120, 2, 0.8);
        c.sgd.epochs = 1;
        c.search = Some(SearchConfig {
            threshold,
            target_metric: "er".into(),
            second_metric: None,
            fractions: vec![0.3, 0.6],
        });
        c
    }

    #[test]
    fn unreachable_threshold() {
        let e = search_report(&cfg(-1.0)).unwrap_err();
        assert!(matches!(e, PipelineError::ThresholdUnreachable { .. }));
        assert_eq!(e.exit_code(), 2);
    }

    #[test]
    fn loose_threshold_bisects_to_the_grid_floor() {
        let r = search_report(&cfg(1.0)).unwrap();
        assert_eq!(r.probes.len(), 6);
        assert!(r.probes.iter().all(|p| p.feasible));
        assert_eq!(r.lambda, LAMBDA_RESOLUTION);
    }

    #[test]
    fn missing_section_is_a_config_error() {
        let mut c = cfg(0.5);
        c.search = None;
        assert_eq!(search_report(&c).unwrap_err().exit_code(), 1);
    }
}
