use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::{NetError, Result};
use crate::seed;

/// Candidate mean on/off durations in seconds.
pub const DEFAULT_MEAN_SET: [f64; 3] = [1.0, 10.0, 20.0];

/// Means of the exponential on and off phase lengths of one flow, seconds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OnOff {
    pub tau_on: f64,
    pub tau_off: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrafficMatrix {
    pub rows: Vec<OnOff>,
    /// Constant sending rate during on phases, shared by all flows.
    pub data_rate_kbps: f64,
}

impl TrafficMatrix {
    pub fn new(rows: Vec<OnOff>, data_rate_kbps: f64) -> Result<Self> {
        let m = Self { rows, data_rate_kbps };
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.data_rate_kbps > 0.0 && self.data_rate_kbps.is_finite()) {
            return Err(NetError::InvalidArgument(format!(
                "data rate must be positive, got {}",
                self.data_rate_kbps
            )));
        }
        for (p, r) in self.rows.iter().enumerate() {
            if !(r.tau_on > 0.0 && r.tau_off > 0.0 && r.tau_on.is_finite() && r.tau_off.is_finite()) {
                return Err(NetError::InvalidArgument(format!(
                    "path {p}: on/off means must be positive, got ({}, {})",
                    r.tau_on, r.tau_off
                )));
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }
}

/// Draws every on and off mean independently and uniformly from `mean_set`.
pub fn sample_traffic_matrix(
    num_paths: usize,
    mean_set: &[f64],
    data_rate_kbps: f64,
    seed: u64,
) -> Result<TrafficMatrix> {
    if mean_set.is_empty() {
        return Err(NetError::InvalidArgument("mean set is empty".into()));
    }
    if mean_set.iter().any(|&m| !(m > 0.0 && m.is_finite())) {
        return Err(NetError::InvalidArgument("mean set values must be positive".into()));
    }
    let mut rng = seed::rng(seed);
    let rows = (0..num_paths)
        .map(|_| {
            let tau_on = *mean_set.choose(&mut rng).expect("non-empty");
            let tau_off = *mean_set.choose(&mut rng).expect("non-empty");
            OnOff { tau_on, tau_off }
        })
        .collect();
    TrafficMatrix::new(rows, data_rate_kbps)
}
