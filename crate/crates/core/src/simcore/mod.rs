//! Discrete-event packet simulator used as the KPI oracle.
//!
//! Flows are on/off sources sending fixed-size packets at a constant rate
//! while on. Packets cross their path through per-link FIFO queues. In
//! wireless mode every node has a single radio and applies carrier sense:
//! it may only start a transmission when no node within the interference
//! radius is transmitting, otherwise it retries after an exponential
//! backoff. Drops come only from queue overflow.

mod config;
mod engine;
mod kpis;

pub use config::SimConfig;
pub use engine::{sample_onoff, simulate, simulate_avg, simulate_traced, SimTrace, Transmission};
pub use kpis::{exp_inverse_cdf, kpis_from_records, FlowKpis, Kpi, MeanKpis, PacketRecord};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SimError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error(transparent)]
    Net(#[from] crate::netmodel::NetError),
}

pub type Result<T> = std::result::Result<T, SimError>;
