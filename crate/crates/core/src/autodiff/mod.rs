//! Dense reverse-mode automatic differentiation.
//!
//! Values live on a [`Tape`]; every operation records its inputs and the
//! backward pass walks the tape in reverse, accumulating gradients. Trainable
//! tensors are owned by a [`ParamStore`] and enter a tape as leaves through
//! [`Tape::param`], which hands out one leaf per parameter, so a parameter
//! used many times (a recurrent cell unrolled over a path) accumulates all of
//! its contributions.
//!
//! All tensors are row-major `f64`. Operations work on matrices; a 1-D
//! tensor of length `n` is treated as a `1 x n` row.

mod adam;
mod checkpoint;
mod gradcheck;
mod layers;
mod tape;
mod tensor;

pub use adam::{AdamConfig, ParamGrads, ParamId, ParamStore};
pub use checkpoint::{read_checkpoint, write_checkpoint, CHECKPOINT_MAGIC, CHECKPOINT_VERSION};
pub use gradcheck::{grad_check, rel_error};
pub use layers::{
    dense, gru_cell, mse_l2_loss, weighted_graph_conv, Activation, DenseParams, GcnParams,
    GraphOperator, GruParams, Mlp,
};
pub use tape::{Gradients, SparseMap, Tape, Var};
pub use tensor::Tensor;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum AdError {
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("checkpoint: {0}")]
    Checkpoint(String),
}

pub type Result<T> = std::result::Result<T, AdError>;
