//! Statistics over labelled benchmark results: outcome shares with binomial
//! standard errors, a pooled two-proportion z-test, bootstrap median errors,
//! time/price summaries and quality-vs-time frontier points.

mod bootstrap;
mod counts;
pub mod dataset;
mod frontier;
pub mod normal;
mod record;
mod shares;
mod summary;
mod ztest;

use thiserror::Error;

pub use bootstrap::{bootstrap_median_se, bootstrap_median_se_exact, median, DEFAULT_B};
pub use counts::{
    counts_for_percentage, derive_counts, recover_counts, CountsFile, CriterionCounts, PrintedCell, PrintedTable,
    SystemCounts,
};
pub use dataset::{load_benchmark, validate_distribution, CellMismatch, Dataset, DatasetError, ManifestEntry, ValidationReport};
pub use frontier::{frontier_points, FrontierPoint};
pub use record::{read_results, Criterion, LabeledResult, RecordError, TOTAL_TOLERANCE_H};
pub use shares::{quality_shares, share_from_counts, ShareEstimate};
pub use summary::{reduction, sample_sd, summarize_time_price, Metric, SummaryRow};
pub use ztest::{two_prop_z_one_sided, ZTestResult};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum StatsError {
    #[error("no records for system `{0}`")]
    NoRecords(String),
    #[error("invalid counts: x1={x1} n1={n1} x2={x2} n2={n2}")]
    InvalidCounts { x1: u64, n1: u64, x2: u64, n2: u64 },
    #[error("no values to resample")]
    Empty,
    #[error("systems differ between inputs: {0:?}")]
    SystemMismatch(Vec<String>),
}
