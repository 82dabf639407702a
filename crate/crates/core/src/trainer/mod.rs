//! Dataset generation, cross-validated training and fold ensembles.
//!
//! A dataset is a list of simulated scenarios stored as JSON Lines with a
//! `.meta.json` sidecar. Training runs k-fold cross-validation: each fold
//! trains a fresh model on the other folds with Adam and early stopping on
//! validation MAE, and keeps its best checkpoint. Predictions average the
//! de-standardised outputs of all fold-best models.

mod cv;
mod dataset;
mod ensemble;
mod train;

pub use cv::{split_cv, Fold};
pub use dataset::{
    build_dataset, meta_path, scaling_for, Dataset, DatasetMeta, Family, GeneratorSpec, Sample,
    SampleRecord,
};
pub use ensemble::{Ensemble, FoldModel};
pub use train::{targets, train, EpochStats, FoldAudit, FoldResult, TrainConfig, TrainOutcome};

use crate::autodiff::AdError;
use crate::netmodel::NetError;
use crate::plannet::PlanError;
use crate::simcore::SimError;

#[derive(Debug, thiserror::Error)]
pub enum TrainError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("dataset build failed: {skipped} of {requested} samples could not be simulated")]
    TooManySkips { skipped: usize, requested: usize },
    #[error("dataset format: {0}")]
    Format(String),
    #[error("fold {fold}: {reason}")]
    Fold { fold: usize, reason: String },
    #[error(transparent)]
    Net(#[from] NetError),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Model(#[from] PlanError),
    #[error(transparent)]
    Autodiff(#[from] AdError),
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
}

pub type Result<T> = std::result::Result<T, TrainError>;

pub(crate) fn io_error(path: &std::path::Path) -> impl FnOnce(std::io::Error) -> TrainError + '_ {
    move |source| TrainError::Io { path: path.display().to_string(), source }
}

#[cfg(test)]
mod tests;
