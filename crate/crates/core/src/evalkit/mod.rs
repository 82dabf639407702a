//! Error metrics, box-plot statistics, paired significance tests and the
//! method-comparison report.
//!
//! All quantiles use linear interpolation between order statistics (the
//! "type 7" rule). NMAE is the MAE divided by the interquartile range of the
//! ground truth, computed over all (scenario, path) pairs of a report group.

mod compare;
mod metrics;
mod signif;

pub use compare::{compare, EvalGroup, MetricReport, Predictor, PredictorKind, ReportRow, BoxRow};
pub use metrics::{box_stats, iqr, mae, nmae, quantile, BoxStats, MaeResult};
pub use signif::{signif_lower, wilcoxon_lower_p, DEFAULT_ALPHA};

use crate::simcore::SimError;
use crate::trainer::TrainError;

#[derive(Debug, thiserror::Error)]
pub enum EvalError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("ground truth has zero interquartile range")]
    DegenerateSpread,
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Train(#[from] TrainError),
}

pub type Result<T> = std::result::Result<T, EvalError>;
