//! End-to-end runs: selection, lambda sweeps, budget/lambda search, sampled
//! augmentation and the synthetic oracle suites. Every command returns a
//! serializable report and writes it atomically under the run's `out_dir`.

mod config;
mod oracle;
mod report;
mod run;
mod saug;
mod search;
mod sweep;

pub use config::{
    default_second_metric, higher_is_better, ConfigError, CsvSource, DatasetSource, ModelConfig, OracleConfig,
    Overrides, RunConfig, SearchConfig, SweepConfig, SyntheticSource, TrainConfig, DEFAULT_FRACTIONS,
    DEFAULT_LAMBDAS, METRICS,
};
pub use oracle::{cmd_oracle_check, oracle_report, OracleReport};
pub use report::{metrics_csv_row, run_id, RunReport, SelectedPoint, METRICS_CSV_HEADER, SCHEMA_VERSION};
pub use run::{cmd_datagen, cmd_select, prepare_data, run_selection, select_report, DatagenReport, PreparedData, Selection};
pub use saug::{cmd_saug, saug_report, SaugReport};
pub use search::{cmd_search, search_report, GridPoint, LambdaProbe, SearchReport, LAMBDA_RESOLUTION};
pub use sweep::{cmd_sweep, sweep_report, SweepReport, SweepRun};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("invalid config: {0}")]
    Config(#[from] ConfigError),
    #[error("data: {0}")]
    Data(String),
    #[error("selection: {0}")]
    Select(#[from] crate::select::SelectError),
    #[error("valuation: {0}")]
    Valuation(#[from] crate::valuation::ValuationError),
    #[error("training: {0}")]
    Train(#[from] crate::trainkit::TrainError),
    #[error("augmentation: {0}")]
    Augment(#[from] crate::augment::AugmentError),
    #[error("metrics: {0}")]
    Metrics(#[from] crate::metrics::MetricsError),
    #[error("dataset: {0}")]
    Synth(#[from] crate::synth::SynthError),
    #[error("threshold {threshold} on {metric} unreachable; best observed {best}")]
    ThresholdUnreachable { metric: String, threshold: f64, best: f64 },
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
    #[error("serialization: {0}")]
    Json(#[from] serde_json::Error),
}

impl PipelineError {
    /// 1 for validation errors, 2 for runtime failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            PipelineError::Config(_) => 1,
            _ => 2,
        }
    }
}

pub type Result<T> = std::result::Result<T, PipelineError>;
