use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{Result, RunConfig};
use crate::metrics::MetricReport;
use crate::select::TraceSummary;

pub const SCHEMA_VERSION: u32 = 1;

pub const METRICS_CSV_HEADER: &str = "run_id,pairing,lambda,fraction,er,eo_disp,dp_disp,sa,ra,wall_ms";

/// One buffered column at the end of the run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectedPoint {
    pub datapoint: usize,
    pub epoch: u32,
    pub beta: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub schema_version: u32,
    pub run_id: String,
    pub config: RunConfig,
    pub n_train: usize,
    pub omega: usize,
    /// Buffer contents `S_T` with their coefficients, in buffer order.
    pub selected: Vec<SelectedPoint>,
    /// Distinct training rows used for the retrain, ascending.
    pub subset: Vec<usize>,
    pub trace: TraceSummary,
    /// Metrics of the model retrained from scratch on `subset`.
    pub metrics: MetricReport,
    pub wall_ms: u64,
}

impl RunReport {
    pub fn csv_row(&self) -> String {
        metrics_csv_row(&self.run_id, &self.config, self.config.effective_fraction(self.n_train), &self.metrics, self.wall_ms)
    }

    pub fn write(&self) -> Result<(PathBuf, PathBuf)> {
        let dir = &self.config.out_dir;
        let json = dir.join(format!("{}.json", self.run_id));
        let csv = dir.join(format!("{}.csv", self.run_id));
        write_json(&json, self)?;
        write_csv_rows(&csv, std::slice::from_ref(&self.csv_row()))?;
        Ok((json, csv))
    }
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// One metrics line in [`METRICS_CSV_HEADER`] order; absent metrics are empty.
pub fn metrics_csv_row(run_id: &str, config: &RunConfig, fraction: f64, m: &MetricReport, wall_ms: u64) -> String {
    format!(
        "{},{},{},{},{},{},{},{},{},{}",
        run_id,
        config.pairing.code(),
        config.lambda,
        fraction,
        m.er,
        fmt_opt(m.eo_disp),
        fmt_opt(m.dp_disp),
        m.sa,
        fmt_opt(m.ra),
        wall_ms
    )
}

/// Deterministic id: command name plus an FNV-1a hash of the resolved config.
pub fn run_id(command: &str, config: &RunConfig) -> String {
    let text = serde_json::to_string(config).expect("config serializes");
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in command.bytes().chain(text.bytes()) {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0100_0000_01b3);
    }
    format!("{command}-{h:016x}")
}

pub(crate) fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    crate::io::write_atomic(path, text.as_bytes())?;
    Ok(())
}

pub(crate) fn write_csv_rows(path: &Path, rows: &[String]) -> Result<()> {
    let mut text = String::from(METRICS_CSV_HEADER);
    text.push('\n');
    for r in rows {
        text.push_str(r);
        text.push('\n');
    }
    crate::io::write_atomic(path, text.as_bytes())?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ids_depend_on_config_only() {
        let c = RunConfig::synthetic(100, 2, 0.5);
        assert_eq!(run_id("select", &c), run_id("select", &c.clone()));
        assert_ne!(run_id("select", &c), run_id("select", &c.with_lambda(0.5)));
        assert_ne!(run_id("select", &c), run_id("sweep", &c));
    }

    #[test]
    fn row_has_header_arity() {
        let c = RunConfig::synthetic(100, 2, 0.5);
        let m = MetricReport {
            dataset: "d".into(),
            model: "m".into(),
            seed: 0,
            er: 0.25,
            sa: 0.75,
            eo_disp: Some(0.1),
            dp_disp: None,
            ra: Some(0.5),
        };
        let row = metrics_csv_row("r", &c, 0.5, &m, 12);
        assert_eq!(row, "r,af,1,0.5,0.25,0.1,,0.75,0.5,12");
        assert_eq!(row.split(',').count(), METRICS_CSV_HEADER.split(',').count());
    }
}
