//! Path-link-node message passing model and its two baselines.
//!
//! [`Variant::PlanNet`] alternates, for `T` rounds, a recurrent pass along
//! every path (reading link and source-node states), a link update from the
//! summed path messages, and a graph convolution over nodes. The readout maps
//! each final path state to one KPI value.
//!
//! [`Variant::LinkPathOnly`] is the same model without any node state, and
//! [`Variant::GenericGnn`] is a plain two-layer graph network over node
//! features with a fixed number of outputs.
//!
//! Scenarios are evaluated in batches: a [`Batch`] is the disjoint union of
//! its scenarios, so one tape pass covers all of them.

mod batch;
mod features;
mod model;

use serde::{Deserialize, Serialize};

use crate::autodiff::AdError;
use crate::netmodel::NetError;

pub use batch::Batch;
pub use features::{build_gnn_features, init_embeddings, EmbeddingState};
pub use model::{ModelManifest, PlanModel};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    PlanNet,
    LinkPathOnly,
    GenericGnn,
}

impl Variant {
    pub const ALL: [Variant; 3] = [Variant::PlanNet, Variant::LinkPathOnly, Variant::GenericGnn];

    pub fn name(self) -> &'static str {
        match self {
            Variant::PlanNet => "plan_net",
            Variant::LinkPathOnly => "link_path_only",
            Variant::GenericGnn => "generic_gnn",
        }
    }

    pub fn uses_nodes(self) -> bool {
        self != Variant::LinkPathOnly
    }
}

impl std::fmt::Display for Variant {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Variant {
    type Err = PlanError;

    fn from_str(s: &str) -> Result<Self> {
        Variant::ALL
            .into_iter()
            .find(|v| v.name() == s)
            .ok_or_else(|| PlanError::InvalidArgument(format!("unknown model variant {s:?}")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ModelConfig {
    pub variant: Variant,
    pub iterations: usize,
    pub path_dim: usize,
    pub link_dim: usize,
    pub node_dim: usize,
    pub link_mlp_hidden: Vec<usize>,
    pub readout_hidden: Vec<usize>,
    pub share_weights_across_iterations: bool,
    /// Output width of the generic graph model; ignored by the other variants.
    pub gnn_paths: usize,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            variant: Variant::PlanNet,
            iterations: 3,
            path_dim: 32,
            link_dim: 16,
            node_dim: 16,
            link_mlp_hidden: vec![32, 64, 128, 32],
            readout_hidden: vec![64, 32, 16],
            share_weights_across_iterations: false,
            gnn_paths: 10,
        }
    }
}

impl ModelConfig {
    pub fn with_variant(variant: Variant) -> Self {
        Self { variant, ..Self::default() }
    }

    pub fn validate(&self) -> Result<()> {
        let dims = [self.iterations, self.link_dim, self.node_dim, self.gnn_paths];
        let hidden = self.link_mlp_hidden.iter().chain(&self.readout_hidden);
        if dims.contains(&0) || hidden.into_iter().any(|&h| h == 0) {
            return Err(PlanError::InvalidArgument(format!("zero dimension in {self:?}")));
        }
        // The initial path state carries (tau_on, tau_off).
        if self.path_dim < 2 {
            return Err(PlanError::InvalidArgument("path_dim must be at least 2".into()));
        }
        Ok(())
    }
}

/// Divisors applied to raw input features.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FeatureScaling {
    pub tau: f64,
    pub capacity_kbps: f64,
    pub degree: f64,
}

impl Default for FeatureScaling {
    fn default() -> Self {
        Self { tau: 20.0, capacity_kbps: 6000.0, degree: 8.0 }
    }
}

impl FeatureScaling {
    pub fn validate(&self) -> Result<()> {
        if [self.tau, self.capacity_kbps, self.degree].iter().all(|&s| s.is_finite() && s > 0.0) {
            Ok(())
        } else {
            Err(PlanError::InvalidArgument(format!("feature scales must be positive: {self:?}")))
        }
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum PlanError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("model has {expected} outputs but the scenario has {got} paths")]
    OutputWidth { expected: usize, got: usize },
    #[error(transparent)]
    Autodiff(#[from] AdError),
    #[error(transparent)]
    Net(#[from] NetError),
    #[error("io: {0}")]
    Io(String),
}

pub type Result<T> = std::result::Result<T, PlanError>;
