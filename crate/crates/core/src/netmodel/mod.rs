//! Network topologies, radio reach, routing and traffic matrices.
//!
//! Everything in here is a pure function of its inputs (and seed, where one
//! is taken). Graphs are always directed; wireless generators emit both
//! directions of every link.

mod graph;
pub mod motifs;
mod radio;
mod routing;
mod scenario;
mod topology;
mod traffic;

pub use graph::{Link, NetworkGraph, Node};
pub use radio::{max_link_distance, path_loss_db, RadioConfig};
pub use routing::{select_path_pairs, shortest_path, PathSpec};
pub use scenario::Scenario;
pub use topology::{
    edge_weight, gen_grid, gen_grid_with_capacity, gen_nsfnet, gen_nsfnet_with_capacity, perturb,
    wireless_graph, NSFNET_EDGES, WEIGHT_CAP, WIRED_CAPACITY_KBPS, WIRELESS_CAPACITY_KBPS,
};
pub use traffic::{sample_traffic_matrix, OnOff, TrafficMatrix, DEFAULT_MEAN_SET};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum NetError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("invalid graph: {0}")]
    InvalidGraph(String),
    #[error("no links possible: {0}")]
    EmptyGraph(String),
    #[error("no path from node {src} to node {dst}")]
    NoPath { src: usize, dst: usize },
}

pub type Result<T> = std::result::Result<T, NetError>;
