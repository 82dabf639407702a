use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use log::{debug, info};
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::cv::split_cv;
use super::dataset::{scaling_for, Dataset};
use super::ensemble::{Ensemble, FoldModel};
use super::{io_error, Result, TrainError};
use crate::autodiff::{mse_l2_loss, AdamConfig, Tape};
use crate::plannet::{ModelConfig, PlanModel, Variant};
use crate::seed;
use crate::simcore::Kpi;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub kpi: Kpi,
    pub folds: usize,
    pub epochs: usize,
    pub batch_size: usize,
    pub lr: f64,
    pub l2_lambda: f64,
    pub patience: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self { kpi: Kpi::Delay, folds: 3, epochs: 200, batch_size: 16, lr: 1e-3, l2_lambda: 1e-4, patience: 20, seed: 0 }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(TrainError::InvalidArgument(m));
        if self.folds < 2 {
            return bad(format!("need at least 2 folds, got {}", self.folds));
        }
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return bad(format!("learning rate must be positive, got {}", self.lr));
        }
        if !(self.l2_lambda >= 0.0) {
            return bad(format!("L2 weight must be non-negative, got {}", self.l2_lambda));
        }
        if self.epochs == 0 || self.batch_size == 0 || self.patience == 0 {
            return bad("epochs, batch size and patience must be positive".into());
        }
        Ok(())
    }

    fn adam(&self) -> AdamConfig {
        AdamConfig { lr: self.lr, ..AdamConfig::default() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochStats {
    pub fold: usize,
    pub epoch: usize,
    pub train_loss: f64,
    pub val_mae: f64,
}

/// Which samples a fold saw, for checking that validation data stayed out
/// of the parameter updates.
#[derive(Debug, Clone, PartialEq)]
pub struct FoldAudit {
    pub train: Vec<usize>,
    pub val: Vec<usize>,
    /// Samples whose targets entered at least one gradient step.
    pub updated_with: Vec<usize>,
    /// Samples whose targets entered the standardisation statistics.
    pub stats_from: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FoldResult {
    pub fold: usize,
    pub best: FoldModel,
    pub best_epoch: usize,
    pub best_val_mae: f64,
    pub curve: Vec<EpochStats>,
    pub audit: FoldAudit,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainOutcome {
    pub folds: Vec<FoldResult>,
    pub config_hash: String,
}

/// Per-path targets of `samples`, flattened in batch order, with validity.
pub fn targets<'a>(samples: impl IntoIterator<Item = &'a super::Sample>, kpi: Kpi) -> (Vec<f64>, Vec<bool>) {
    let mut values = Vec::new();
    let mut mask = Vec::new();
    for s in samples {
        for k in &s.kpis {
            let v = kpi.of(k);
            values.push(v.unwrap_or(0.0));
            mask.push(v.is_some());
        }
    }
    (values, mask)
}

fn mean_std(values: &[f64], mask: &[bool]) -> Option<(f64, f64)> {
    let valid: Vec<f64> = values.iter().zip(mask).filter(|(_, &m)| m).map(|(&v, _)| v).collect();
    if valid.is_empty() {
        return None;
    }
    let n = valid.len() as f64;
    let mean = valid.iter().sum::<f64>() / n;
    let var = valid.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    // A constant target gets unit scale instead of a division by zero.
    let std = if var > 0.0 { var.sqrt() } else { 1.0 };
    Some((mean, std))
}

fn validation_mae(fm: &FoldModel, data: &Dataset, val: &[usize]) -> Result<f64> {
    let sub = data.subset(val);
    let pred = fm.predict(&sub.scenarios())?;
    let (truth, mask) = targets(&sub.samples, fm.kpi);
    let (mut sum, mut n) = (0.0, 0usize);
    for ((p, t), m) in pred.iter().flatten().zip(&truth).zip(&mask) {
        if *m {
            sum += (p - t).abs();
            n += 1;
        }
    }
    Ok(sum / n as f64)
}

fn train_fold(
    data: &Dataset,
    model_cfg: &ModelConfig,
    cfg: &TrainConfig,
    fold: usize,
    train_idx: &[usize],
    val_idx: &[usize],
) -> Result<FoldResult> {
    let fold_err = |reason: &str| TrainError::Fold { fold, reason: reason.into() };
    let fold_seed = seed::derive_indexed(cfg.seed, "fold", fold as u64);
    let scaling = scaling_for(data);
    let (train_y, train_mask) = targets(train_idx.iter().map(|&i| &data.samples[i]), cfg.kpi);
    let (mean, std) = mean_std(&train_y, &train_mask).ok_or_else(|| fold_err("no defined training targets"))?;
    let (_, val_mask) = targets(val_idx.iter().map(|&i| &data.samples[i]), cfg.kpi);
    if !val_mask.contains(&true) {
        return Err(fold_err("no defined validation targets"));
    }
    let model = PlanModel::new(model_cfg.clone(), scaling, seed::derive_seed(fold_seed, "init"))?;
    let mut current = FoldModel { model, kpi: cfg.kpi, target_mean: mean, target_std: std };
    let adam = cfg.adam();

    let mut best = current.clone();
    let mut best_mae = f64::INFINITY;
    let mut best_epoch = 0;
    let mut since_best = 0;
    let mut curve = Vec::new();
    let mut updated_with = BTreeSet::new();
    let mut order = train_idx.to_vec();
    for epoch in 1..=cfg.epochs {
        order.sort_unstable();
        order.shuffle(&mut seed::rng(seed::derive_indexed(fold_seed, "epoch", epoch as u64)));
        let (mut loss_sum, mut batches) = (0.0, 0usize);
        for chunk in order.chunks(cfg.batch_size) {
            let samples: Vec<_> = chunk.iter().map(|&i| &data.samples[i]).collect();
            let (y, mask) = targets(samples.iter().copied(), cfg.kpi);
            if !mask.contains(&true) {
                continue;
            }
            let y: Vec<f64> = y.iter().map(|v| (v - mean) / std).collect();
            let scenarios: Vec<_> = samples.iter().map(|s| &s.scenario).collect();
            let batch = current.model.batch(&scenarios)?;
            let mut tape = Tape::new();
            let out = current.model.forward_tape(&mut tape, &batch)?;
            let loss = mse_l2_loss(&mut tape, current.model.store(), out, &y, &mask, cfg.l2_lambda)?;
            let value = tape.value(loss).item();
            if !value.is_finite() {
                return Err(fold_err(&format!("loss diverged at epoch {epoch}")));
            }
            let grads = tape.backward(loss).params(current.model.store());
            current.model.store_mut().adam_step(&grads, &adam)?;
            updated_with.extend(chunk.iter().copied());
            loss_sum += value;
            batches += 1;
        }
        let val_mae = validation_mae(&current, data, val_idx)?;
        let train_loss = loss_sum / batches.max(1) as f64;
        debug!("fold {fold} epoch {epoch}: train loss {train_loss:.5}, val MAE {val_mae:.5}");
        curve.push(EpochStats { fold, epoch, train_loss, val_mae });
        if val_mae < best_mae {
            best_mae = val_mae;
            best = current.clone();
            best_epoch = epoch;
            since_best = 0;
        } else {
            since_best += 1;
            if since_best >= cfg.patience {
                break;
            }
        }
    }
    info!("fold {fold}: best val MAE {best_mae:.5} at epoch {best_epoch} of {}", curve.len());
    Ok(FoldResult {
        fold,
        best,
        best_epoch,
        best_val_mae: best_mae,
        curve,
        audit: FoldAudit {
            train: train_idx.to_vec(),
            val: val_idx.to_vec(),
            updated_with: updated_with.into_iter().collect(),
            stats_from: train_idx.to_vec(),
        },
    })
}

/// Cross-validated training; one fold-best model per fold.
pub fn train(data: &Dataset, model_cfg: &ModelConfig, cfg: &TrainConfig) -> Result<TrainOutcome> {
    cfg.validate()?;
    model_cfg.validate()?;
    if data.is_empty() {
        return Err(TrainError::InvalidArgument("empty dataset".into()));
    }
    if model_cfg.variant == Variant::GenericGnn {
        if let Some(s) = data.samples.iter().find(|s| s.scenario.path_count() != model_cfg.gnn_paths) {
            return Err(TrainError::InvalidArgument(format!(
                "generic_gnn has a fixed output width of {} paths but a sample has {}; \
                 it cannot serve datasets with varying path counts",
                model_cfg.gnn_paths,
                s.scenario.path_count()
            )));
        }
    }
    let hash_input = serde_json::json!({
        "model": model_cfg,
        "train": cfg,
        "dataset": data.meta.generator_hash,
        "dataset_seed": data.meta.seed,
        "samples": data.len(),
    });
    let config_hash = seed::hash_str(&hash_input.to_string());
    let folds = split_cv(data.len(), cfg.folds, cfg.seed)?;
    let results = folds
        .iter()
        .enumerate()
        .map(|(k, f)| train_fold(data, model_cfg, cfg, k, &f.train, &f.val))
        .collect::<Result<Vec<_>>>()?;
    Ok(TrainOutcome { folds: results, config_hash })
}

impl TrainOutcome {
    pub fn ensemble(&self) -> Ensemble {
        Ensemble::new(self.folds.iter().map(|f| f.best.clone()).collect()).expect("folds share KPI and variant")
    }

    pub fn curves_csv(&self) -> String {
        let mut out = String::from("fold,epoch,train_loss,val_mae\n");
        for s in self.folds.iter().flat_map(|f| &f.curve) {
            writeln!(out, "{},{},{},{}", s.fold, s.epoch, s.train_loss, s.val_mae).expect("string write");
        }
        out
    }

    /// Writes `fold<k>.ckpt` (+ manifest) per fold and `curves.csv`;
    /// returns the checkpoint paths.
    pub fn save(&self, dir: &Path) -> Result<Vec<PathBuf>> {
        fs::create_dir_all(dir).map_err(io_error(dir))?;
        let mut paths = Vec::with_capacity(self.folds.len());
        for f in &self.folds {
            let path = dir.join(format!("fold{}.ckpt", f.fold));
            f.best.save(&path, &self.config_hash)?;
            paths.push(path);
        }
        let curves = dir.join("curves.csv");
        fs::write(&curves, self.curves_csv()).map_err(io_error(&curves))?;
        Ok(paths)
    }
}
