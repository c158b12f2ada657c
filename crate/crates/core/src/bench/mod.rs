//! Simulated-subject experiments: metrics, the trial runner and reports.
//!
//! Every cost reported here is evaluated under the trial's ground-truth
//! matrix, never under the matrix the method itself used.

mod metrics;
mod report;
mod runner;
mod timing;

use thiserror::Error;

use crate::conic::ConicError;
use crate::cost::CostError;
use crate::data::DataError;
use crate::elicit::ElicitError;

pub use metrics::{mean_rank, wilcoxon_one_sided, WILCOXON_EXACT_LIMIT, WILCOXON_MIN_PAIRS};
pub use report::{write_raw_csv, Comparison, Report, ReportCell, Summary};
pub use runner::{
    derive_seed, prepare, prepare_with, run_experiment, run_prepared, DatasetRef, ExperimentConfig, Method, Prepared,
    TrialRow,
};
pub use timing::{selection_timing, write_timing_csv, TimingRow};

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("all paired differences are zero")]
    AllZeroDifferences,
    #[error("{0} nonzero differences; the signed-rank test needs at least 5")]
    TooFewPairs(usize),
    #[error(transparent)]
    Data(#[from] DataError),
    #[error(transparent)]
    Elicit(#[from] ElicitError),
    #[error(transparent)]
    Conic(#[from] ConicError),
    #[error(transparent)]
    Cost(#[from] CostError),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
