use serde::{Deserialize, Serialize};

use super::{Result, SimError};
use crate::netmodel::{max_link_distance, RadioConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SimConfig {
    /// Simulated time during which sources emit, seconds. In-flight packets
    /// are drained after it ends.
    pub duration_s: f64,
    pub packet_size_bytes: usize,
    /// Waiting-room size of each directed link, packets.
    pub queue_capacity: usize,
    pub backoff_mean_s: f64,
    /// Carrier-sense radius in meters; `None` simulates wired point-to-point
    /// links with no medium sharing.
    pub interference_radius_m: Option<f64>,
    pub prop_delay_s: f64,
    pub seed: u64,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            duration_s: 30.0,
            packet_size_bytes: 512,
            queue_capacity: 100,
            backoff_mean_s: 1e-3,
            interference_radius_m: None,
            prop_delay_s: 10e-6,
            seed: 0,
        }
    }
}

impl SimConfig {
    /// Wireless defaults with the interference radius equal to the radio reach.
    pub fn wireless(radio: &RadioConfig) -> Self {
        Self { interference_radius_m: Some(max_link_distance(radio)), ..Self::default() }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn packet_bits(&self) -> f64 {
        self.packet_size_bytes as f64 * 8.0
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(SimError::InvalidArgument(m.to_string()));
        if !(self.duration_s > 0.0 && self.duration_s.is_finite()) {
            return bad("duration must be positive");
        }
        if self.packet_size_bytes == 0 {
            return bad("packet size must be positive");
        }
        if self.queue_capacity == 0 {
            return bad("queue capacity must be at least one packet");
        }
        if !(self.backoff_mean_s > 0.0 && self.backoff_mean_s.is_finite()) {
            return bad("backoff mean must be positive");
        }
        if !(self.prop_delay_s >= 0.0 && self.prop_delay_s.is_finite()) {
            return bad("propagation delay must be non-negative");
        }
        if let Some(r) = self.interference_radius_m {
            if !(r >= 0.0) {
                return bad("interference radius must be non-negative");
            }
        }
        Ok(())
    }
}
