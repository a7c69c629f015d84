//! Online, value-function-driven data valuation and subset selection.
//!
//! Every SGD step of a training run is turned into a feature column over a
//! set of value coordinates (validation loss decreases, fairness and
//! robustness changes). An online sparse-approximation solver keeps a
//! bounded buffer of the columns that best explain the cumulative value
//! target; the surviving training points form the selected subset.

pub mod linalg;
pub mod select;
pub mod trainkit;
pub mod valuation;

pub mod augment;
pub mod io;
pub mod metrics;
pub mod synth;
pub mod pipeline;
