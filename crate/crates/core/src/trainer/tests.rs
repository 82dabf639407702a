use std::sync::OnceLock;

use super::*;
use crate::autodiff::{mse_l2_loss, Tape};
use crate::plannet::{ModelConfig, Variant};
use crate::simcore::{Kpi, SimConfig};

fn spec(family: Family) -> GeneratorSpec {
    GeneratorSpec { family, sim: SimConfig { duration_s: 5.0, ..SimConfig::default() }, ..GeneratorSpec::default() }
}

fn nsfnet_50() -> &'static Dataset {
    static DATA: OnceLock<Dataset> = OnceLock::new();
    DATA.get_or_init(|| build_dataset(&spec(Family::Nsfnet), 50, 11).unwrap())
}

fn small_model() -> ModelConfig {
    ModelConfig {
        iterations: 2,
        path_dim: 8,
        link_dim: 6,
        node_dim: 4,
        link_mlp_hidden: vec![12, 8],
        readout_hidden: vec![8],
        ..ModelConfig::default()
    }
}

fn quick_train() -> TrainConfig {
    TrainConfig { epochs: 6, patience: 3, lr: 3e-3, ..TrainConfig::default() }
}

#[test]
fn config_validation() {
    assert!(TrainConfig { lr: 0.0, ..TrainConfig::default() }.validate().is_err());
    assert!(TrainConfig { folds: 1, ..TrainConfig::default() }.validate().is_err());
    assert!(TrainConfig::default().validate().is_ok());
    let empty = Dataset { samples: vec![], ..nsfnet_50().clone() };
    assert!(train(&empty, &small_model(), &quick_train()).is_err());
}

#[test]
fn training_loss_falls_on_nsfnet_delay() {
    let cfg = TrainConfig { epochs: 50, patience: 50, ..TrainConfig::default() };
    let out = train(nsfnet_50(), &ModelConfig::default(), &cfg).unwrap();
    for f in &out.folds {
        assert_eq!(f.curve.len(), 50);
        assert!(f.curve[49].train_loss < f.curve[0].train_loss, "fold {}", f.fold);
    }
}

#[test]
fn training_is_deterministic() {
    let a = train(nsfnet_50(), &small_model(), &quick_train()).unwrap();
    let b = train(nsfnet_50(), &small_model(), &quick_train()).unwrap();
    assert_eq!(a, b);
    let c = train(nsfnet_50(), &small_model(), &TrainConfig { seed: 1, ..quick_train() }).unwrap();
    assert_ne!(a.folds[0].best, c.folds[0].best);
}

#[test]
fn folds_never_learn_from_their_validation_samples() {
    let out = train(nsfnet_50(), &small_model(), &quick_train()).unwrap();
    let mut all_val = Vec::new();
    for f in &out.folds {
        assert!(f.audit.updated_with.iter().all(|i| !f.audit.val.contains(i)));
        assert!(f.audit.stats_from.iter().all(|i| !f.audit.val.contains(i)));
        all_val.extend(f.audit.val.iter().copied());
    }
    all_val.sort_unstable();
    assert_eq!(all_val, (0..50).collect::<Vec<_>>());
}

#[test]
fn early_stopping_keeps_the_best_epoch() {
    let cfg = TrainConfig { epochs: 30, patience: 4, lr: 2e-2, ..TrainConfig::default() };
    let out = train(nsfnet_50(), &small_model(), &cfg).unwrap();
    let data = nsfnet_50();
    for f in &out.folds {
        let min = f.curve.iter().map(|s| s.val_mae).fold(f64::INFINITY, f64::min);
        assert_eq!(f.best_val_mae, min);
        assert_eq!(f.curve[f.best_epoch - 1].val_mae, min);
        let last = f.curve.len();
        assert!(last == 30 || last - f.best_epoch == 4);
        // The stored model reproduces its recorded score.
        let sub = data.subset(&f.audit.val);
        let pred = f.best.predict(&sub.scenarios()).unwrap();
        let (t, m) = targets(&sub.samples, Kpi::Delay);
        let errs: Vec<f64> =
            pred.iter().flatten().zip(&t).zip(&m).filter(|(_, &m)| m).map(|((p, t), _)| (p - t).abs()).collect();
        let mae = errs.iter().sum::<f64>() / errs.len() as f64;
        assert!((mae - f.best_val_mae).abs() < 1e-12);
    }
    let csv = out.curves_csv();
    assert_eq!(csv.lines().count(), 1 + out.folds.iter().map(|f| f.curve.len()).sum::<usize>());
    assert!(csv.lines().count() - 1 <= 30 * 3);
}

#[test]
fn masked_samples_do_not_move_gradients() {
    let data = nsfnet_50();
    let model = crate::plannet::PlanModel::new(small_model(), scaling_for(data), 3).unwrap();
    let a = &data.samples[0];
    let b = &data.samples[1];
    let grads = |samples: &[&Sample], keep_b: bool| {
        let (y, mut mask) = targets(samples.iter().copied(), Kpi::Delay);
        if !keep_b && samples.len() > 1 {
            let n = samples[0].kpis.len();
            mask[n..].iter_mut().for_each(|m| *m = false);
        }
        let scenarios: Vec<_> = samples.iter().map(|s| &s.scenario).collect();
        let batch = model.batch(&scenarios).unwrap();
        let mut tape = Tape::new();
        let out = model.forward_tape(&mut tape, &batch).unwrap();
        let loss = mse_l2_loss(&mut tape, model.store(), out, &y, &mask, 1e-4).unwrap();
        tape.backward(loss).params(model.store())
    };
    let alone = grads(&[a], true);
    let with_masked = grads(&[a, b], false);
    let with_b = grads(&[a, b], true);
    for id in model.store().ids() {
        for (x, y) in alone.get(id).iter().zip(with_masked.get(id)) {
            assert!((x - y).abs() <= 1e-12 * x.abs().max(1.0));
        }
    }
    assert_ne!(alone, with_b);
}

#[test]
fn generic_model_refuses_varying_path_counts() {
    let mut data = nsfnet_50().clone();
    let cfg = ModelConfig { gnn_paths: 10, ..ModelConfig::with_variant(Variant::GenericGnn) };
    assert!(train(&data.subset(&(0..12).collect::<Vec<_>>()), &cfg, &TrainConfig { epochs: 1, ..quick_train() }).is_ok());
    data.samples[3].scenario.paths.pop();
    data.samples[3].scenario.traffic.rows.pop();
    data.samples[3].kpis.pop();
    let err = train(&data, &cfg, &quick_train()).unwrap_err();
    assert!(err.to_string().contains("fixed output width"));
}

#[test]
fn ensembles_average_their_members() {
    let out = train(nsfnet_50(), &small_model(), &quick_train()).unwrap();
    let data = nsfnet_50();
    let scen = data.scenarios();
    let single = Ensemble::new(vec![out.folds[0].best.clone()]).unwrap();
    assert_eq!(single.predict(&scen).unwrap(), out.folds[0].best.predict(&scen).unwrap());

    let pair = Ensemble::new(vec![out.folds[0].best.clone(), out.folds[1].best.clone()]).unwrap();
    let a = out.folds[0].best.predict(&scen).unwrap();
    let b = out.folds[1].best.predict(&scen).unwrap();
    for ((p, x), y) in pair.predict(&scen).unwrap().iter().flatten().zip(a.iter().flatten()).zip(b.iter().flatten()) {
        assert!((p - (x + y) / 2.0).abs() < 1e-12);
    }

    let mut other = out.folds[2].best.clone();
    other.kpi = Kpi::Jitter;
    assert!(Ensemble::new(vec![out.folds[0].best.clone(), other]).is_err());
    assert!(Ensemble::new(vec![]).is_err());
}

#[test]
fn ensemble_mae_within_member_range_on_held_out_data() {
    let train_set = nsfnet_50();
    let test = build_dataset(&spec(Family::Nsfnet), 20, 99).unwrap();
    let out = train(train_set, &small_model(), &TrainConfig { epochs: 15, ..quick_train() }).unwrap();
    let (t, m) = targets(&test.samples, Kpi::Delay);
    let mae = |pred: Vec<Vec<f64>>| {
        let e: Vec<f64> =
            pred.iter().flatten().zip(&t).zip(&m).filter(|(_, &m)| m).map(|((p, t), _)| (p - t).abs()).collect();
        e.iter().sum::<f64>() / e.len() as f64
    };
    let scen = test.scenarios();
    let worst = out.folds.iter().map(|f| mae(f.best.predict(&scen).unwrap())).fold(0.0, f64::max);
    assert!(mae(out.ensemble().predict(&scen).unwrap()) <= worst);
}

#[test]
fn saved_folds_reload_as_an_ensemble() {
    let dir = tempfile::tempdir().unwrap();
    let out = train(nsfnet_50(), &small_model(), &TrainConfig { epochs: 2, ..quick_train() }).unwrap();
    let paths = out.save(dir.path()).unwrap();
    assert_eq!(paths.len(), 3);
    assert!(dir.path().join("curves.csv").exists());
    let back = Ensemble::load(&paths).unwrap();
    let scen = nsfnet_50().scenarios();
    assert_eq!(back.predict(&scen).unwrap(), out.ensemble().predict(&scen).unwrap());
    assert_eq!(back.kpi(), Kpi::Delay);
}
