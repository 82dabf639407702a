use std::path::Path;

use super::{Result, TrainError};
use crate::netmodel::Scenario;
use crate::plannet::{ModelManifest, PlanModel, Variant};
use crate::simcore::Kpi;

/// Scenarios per forward pass when predicting.
const PREDICT_CHUNK: usize = 64;

/// A trained fold model with the target standardisation it was fitted on.
#[derive(Debug, Clone, PartialEq)]
pub struct FoldModel {
    pub model: PlanModel,
    pub kpi: Kpi,
    pub target_mean: f64,
    pub target_std: f64,
}

impl FoldModel {
    /// Raw (standardised) model outputs.
    pub fn predict_standardised(&self, scenarios: &[&Scenario]) -> Result<Vec<Vec<f64>>> {
        let mut out = Vec::with_capacity(scenarios.len());
        for chunk in scenarios.chunks(PREDICT_CHUNK) {
            out.extend(self.model.predict(chunk)?);
        }
        Ok(out)
    }

    /// Predictions in KPI units.
    pub fn predict(&self, scenarios: &[&Scenario]) -> Result<Vec<Vec<f64>>> {
        let mut out = self.predict_standardised(scenarios)?;
        for y in out.iter_mut().flatten() {
            *y = *y * self.target_std + self.target_mean;
        }
        Ok(out)
    }

    pub fn manifest(&self, config_hash: &str) -> ModelManifest {
        ModelManifest {
            variant: self.model.config().variant,
            config: self.model.config().clone(),
            scaling: *self.model.scaling(),
            kpi: self.kpi.name().to_string(),
            config_hash: config_hash.to_string(),
            target_mean: self.target_mean,
            target_std: self.target_std,
            num_params: self.model.num_params(),
        }
    }

    pub fn save(&self, checkpoint: &Path, config_hash: &str) -> Result<()> {
        Ok(self.model.save(checkpoint, &self.manifest(config_hash))?)
    }

    pub fn load(checkpoint: &Path) -> Result<Self> {
        let (model, manifest) = PlanModel::load(checkpoint)?;
        let kpi = manifest.kpi.parse().map_err(TrainError::Format)?;
        Ok(Self { model, kpi, target_mean: manifest.target_mean, target_std: manifest.target_std })
    }
}

/// Mean of several fold models of one variant and KPI.
#[derive(Debug, Clone, PartialEq)]
pub struct Ensemble {
    members: Vec<FoldModel>,
}

impl Ensemble {
    pub fn new(members: Vec<FoldModel>) -> Result<Self> {
        let Some(first) = members.first() else {
            return Err(TrainError::InvalidArgument("an ensemble needs at least one model".into()));
        };
        let (kpi, variant) = (first.kpi, first.model.config().variant);
        if members.iter().any(|m| m.kpi != kpi || m.model.config().variant != variant) {
            return Err(TrainError::InvalidArgument("ensemble members mix KPIs or model variants".into()));
        }
        Ok(Self { members })
    }

    pub fn load(checkpoints: &[impl AsRef<Path>]) -> Result<Self> {
        Self::new(checkpoints.iter().map(|p| FoldModel::load(p.as_ref())).collect::<Result<_>>()?)
    }

    pub fn kpi(&self) -> Kpi {
        self.members[0].kpi
    }

    pub fn variant(&self) -> Variant {
        self.members[0].model.config().variant
    }

    pub fn members(&self) -> &[FoldModel] {
        &self.members
    }

    pub fn predict(&self, scenarios: &[&Scenario]) -> Result<Vec<Vec<f64>>> {
        let mut sum: Option<Vec<Vec<f64>>> = None;
        for m in &self.members {
            let y = m.predict(scenarios)?;
            match sum.as_mut() {
                None => sum = Some(y),
                Some(acc) => {
                    for (a, b) in acc.iter_mut().flatten().zip(y.iter().flatten()) {
                        *a += b;
                    }
                }
            }
        }
        let n = self.members.len() as f64;
        let mut out = sum.expect("at least one member");
        out.iter_mut().flatten().for_each(|v| *v /= n);
        Ok(out)
    }
}
