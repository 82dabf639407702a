//! Network digital twin toolkit.
//!
//! * [`netmodel`] builds topologies, routes and traffic matrices.
//! * [`simcore`] is a discrete-event packet simulator that produces per-flow
//!   KPIs (delay, jitter, throughput, drops) used as ground truth.
//! * [`autodiff`] is a small dense reverse-mode AD engine with the layers the
//!   predictors need.
//! * [`plannet`] holds the path/link/node message-passing model and its two
//!   baselines.
//! * [`trainer`] and [`evalkit`] cover dataset generation, cross-validated
//!   training, ensembling and metric reports.
//! * [`cli`] wires the pipeline into the `ndt` binary.

pub mod autodiff;
pub mod cli;
pub mod evalkit;
pub mod netmodel;
pub mod plannet;
pub mod simcore;
pub mod seed;
pub mod trainer;
