use serde::{Deserialize, Serialize};

use super::{NetError, Result};

/// Log-distance link budget: `PL(d) = pl0 + 10·gamma·log10(d / 1 m)`.
///
/// A link exists when the received power `ptx − PL(d)` is at or above the
/// receiver sensitivity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RadioConfig {
    pub ptx_dbm: f64,
    pub pl0_db: f64,
    pub gamma: f64,
    pub rx_sens_dbm: f64,
}

impl Default for RadioConfig {
    fn default() -> Self {
        Self { ptx_dbm: 16.0, pl0_db: 41.6, gamma: 3.0, rx_sens_dbm: -77.0 }
    }
}

impl RadioConfig {
    pub fn with_ptx(mut self, ptx_dbm: f64) -> Self {
        self.ptx_dbm = ptx_dbm;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let fields = [self.ptx_dbm, self.pl0_db, self.gamma, self.rx_sens_dbm];
        if !fields.iter().all(|v| v.is_finite()) {
            return Err(NetError::InvalidArgument("radio constants must be finite".into()));
        }
        if self.gamma <= 0.0 {
            return Err(NetError::InvalidArgument(format!(
                "path-loss exponent must be positive, got {}",
                self.gamma
            )));
        }
        if self.ptx_dbm - self.rx_sens_dbm - self.pl0_db <= 0.0 {
            return Err(NetError::InvalidArgument(
                "link budget leaves less than 1 m of range".into(),
            ));
        }
        Ok(())
    }
}

pub fn path_loss_db(radio: &RadioConfig, d: f64) -> f64 {
    radio.pl0_db + 10.0 * radio.gamma * d.log10()
}

/// Largest distance (meters) at which the received power still meets the
/// sensitivity threshold.
pub fn max_link_distance(radio: &RadioConfig) -> f64 {
    let budget = radio.ptx_dbm - radio.rx_sens_dbm - radio.pl0_db;
    10f64.powf(budget / (10.0 * radio.gamma))
}
