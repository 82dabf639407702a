//! Acceptance suite. Each test prints one `ACCEPTANCE <k> <name>: PASS|FAIL`
//! line (straight to stderr, so it shows even when output is captured) and
//! then asserts the same condition.

use std::io::Write as _;
use std::path::Path;
use std::process::Command;
use std::time::Instant;

use ndt::autodiff::{grad_check, mse_l2_loss, Tape};
use ndt::cli::{bench, bench_inputs, RunConfig};
use ndt::evalkit::{compare, nmae, signif_lower, EvalGroup, Predictor};
use ndt::netmodel::motifs::{parallel_motif, star_motif};
use ndt::netmodel::{gen_grid, shortest_path, OnOff, RadioConfig, Scenario, TrafficMatrix};
use ndt::plannet::{FeatureScaling, ModelConfig, PlanModel, Variant};
use ndt::seed::{derive_indexed, derive_seed};
use ndt::simcore::Kpi;
use ndt::trainer::{build_dataset, train, Family, GeneratorSpec, TrainConfig};

fn report(id: u32, name: &str, pass: bool, detail: &str) {
    let verdict = if pass { "PASS" } else { "FAIL" };
    let line = format!("ACCEPTANCE {id:>2} {name}: {verdict} ({detail})\n");
    let _ = std::io::stderr().lock().write_all(line.as_bytes());
}

fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

#[test]
fn c01_distinguishability() {
    let start = Instant::now();
    let traffic = [
        OnOff { tau_on: 10.0, tau_off: 1.0 },
        OnOff { tau_on: 1.0, tau_off: 20.0 },
        OnOff { tau_on: 20.0, tau_off: 10.0 },
    ];
    let parallel = [parallel_motif(false, &traffic, 100.0).unwrap(), parallel_motif(true, &traffic, 100.0).unwrap()];
    let star = [star_motif(false, &traffic, 100.0).unwrap(), star_motif(true, &traffic, 100.0).unwrap()];
    let all: Vec<&Scenario> = parallel.iter().chain(&star).collect();

    let mut lpo_worst = 0.0f64;
    let mut plan_distinct = [0usize; 2];
    for init in 0..10u64 {
        let lpo = PlanModel::new(ModelConfig::with_variant(Variant::LinkPathOnly), FeatureScaling::default(), init).unwrap();
        let ys: Vec<Vec<f64>> = all.iter().map(|s| lpo.forward(s).unwrap()).collect();
        for a in &ys {
            for b in &ys {
                lpo_worst = lpo_worst.max(max_abs_diff(a, b));
            }
        }
        let plan = PlanModel::new(ModelConfig::default(), FeatureScaling::default(), init).unwrap();
        for (k, (p, s)) in parallel.iter().zip(&star).enumerate() {
            if max_abs_diff(&plan.forward(p).unwrap(), &plan.forward(s).unwrap()) > 1e-6 {
                plan_distinct[k] += 1;
            }
        }
    }
    let secs = start.elapsed().as_secs_f64();
    let pass = lpo_worst <= 1e-9 && plan_distinct.iter().all(|&n| n >= 9) && secs < 10.0;
    report(
        1,
        "distinguishability",
        pass,
        &format!(
            "link_path_only max pairwise diff {lpo_worst:.2e} <= 1e-9; plan_net parallel/star differ in {}/10 (far) and {}/10 (close) inits, need >= 9; {secs:.1} s",
            plan_distinct[0], plan_distinct[1]
        ),
    );
    assert!(pass);
}

#[test]
fn c02_gradient_check() {
    let start = Instant::now();
    // 2x2 grid at 12 dBm: only the 30 m orthogonal links exist.
    let g = gen_grid(2, 2, 30.0, &RadioConfig::default().with_ptx(12.0)).unwrap();
    assert_eq!((g.node_count(), g.link_count()), (4, 8));
    let paths = vec![shortest_path(&g, 0, 3).unwrap(), shortest_path(&g, 2, 3).unwrap()];
    let traffic =
        TrafficMatrix::new(vec![OnOff { tau_on: 10.0, tau_off: 1.0 }, OnOff { tau_on: 1.0, tau_off: 20.0 }], 100.0)
            .unwrap();
    let s = Scenario::new(g, paths, traffic).unwrap();
    // All three update kinds over the default three rounds at compact widths.
    let cfg = ModelConfig {
        path_dim: 8,
        link_dim: 6,
        node_dim: 4,
        link_mlp_hidden: vec![8, 8],
        readout_hidden: vec![8],
        ..ModelConfig::default()
    };
    assert_eq!(cfg.iterations, 3);
    let mut m = PlanModel::new(cfg, FeatureScaling::default(), 2).unwrap();
    let mut rng = ndt::seed::rng(20);
    for id in m.store().ids().collect::<Vec<_>>() {
        use rand::Rng as _;
        m.store_mut().value_mut(id).data_mut().iter_mut().for_each(|x| *x = rng.gen_range(-0.6..0.6));
    }
    let batch = m.batch(&[&s]).unwrap();
    let target = [0.7, -0.2];
    let loss_of = |m: &PlanModel| {
        let mut tape = Tape::new();
        let y = m.forward_tape(&mut tape, &batch).unwrap();
        let l = mse_l2_loss(&mut tape, m.store(), y, &target, &[true, true], 1e-4).unwrap();
        (tape, l)
    };
    let (tape, l) = loss_of(&m);
    let grads = tape.backward(l).params(m.store());
    let store = m.store();
    let ids: Vec<_> = store.ids().collect();
    let analytic: Vec<f64> = ids.iter().flat_map(|&id| grads.get(id).to_vec()).collect();
    let point: Vec<f64> = ids.iter().flat_map(|&id| store.value(id).data().to_vec()).collect();
    let mut probe = m.clone();
    let probe = std::cell::RefCell::new(&mut probe);
    let loss_at = |x: &[f64]| {
        let mut p = probe.borrow_mut();
        let mut at = 0;
        for &id in &ids {
            let v = p.store_mut().value_mut(id).data_mut();
            let n = v.len();
            v.copy_from_slice(&x[at..at + n]);
            at += n;
        }
        let (tape, l) = loss_of(&p);
        tape.value(l).item()
    };
    let err = grad_check(loss_at, &point, &analytic, 1e-6);
    let secs = start.elapsed().as_secs_f64();
    // Diagnostic only: a coarser step separates truncation from roundoff.
    let coarse = grad_check(loss_at, &point, &analytic, 1e-4);
    let pass = err < 1e-5 && secs < 60.0;
    report(
        2,
        "gradient-check",
        pass,
        &format!(
            "max relative error {err:.2e} < 1e-5 over {} parameters, h = 1e-6; {secs:.1} s; at h = 1e-4: {coarse:.2e}",
            point.len()
        ),
    );
    assert!(pass);
}

#[test]
fn c03_grid_delay_ordering() {
    let start = Instant::now();
    let spec = GeneratorSpec { family: Family::Grid, ..GeneratorSpec::default() };
    assert_eq!(spec.radio.ptx_dbm, 16.0);
    let cfg = TrainConfig { kpi: Kpi::Delay, epochs: 100, patience: 20, ..TrainConfig::default() };
    let mut per_seed = Vec::new();
    for seed in 0..3u64 {
        let train_set = build_dataset(&spec, 300, derive_indexed(seed, "train", 0)).unwrap();
        let test_set = build_dataset(&spec, 100, derive_indexed(seed, "test", 0)).unwrap();
        let mut preds = Vec::new();
        for variant in [Variant::PlanNet, Variant::LinkPathOnly] {
            let out = train(&train_set, &ModelConfig::with_variant(variant), &TrainConfig { seed, ..cfg.clone() }).unwrap();
            preds.push(Predictor::model(variant.name(), out.ensemble()));
        }
        let r = compare(&[EvalGroup { label: "grid", dataset: &test_set }], &preds, &[Kpi::Delay], 0.05).unwrap();
        let plan = r.row("plan_net", Kpi::Delay, "grid").unwrap().nmae_mean;
        let lpo = r.row("link_path_only", Kpi::Delay, "grid").unwrap().nmae_mean;
        per_seed.push((plan, lpo));
    }
    let mean = |f: fn(&(f64, f64)) -> f64| per_seed.iter().map(f).sum::<f64>() / per_seed.len() as f64;
    let (plan, lpo) = (mean(|p| p.0), mean(|p| p.1));
    let secs = start.elapsed().as_secs_f64();
    let pass = plan < lpo && secs < 45.0 * 60.0;
    let seeds: Vec<String> = per_seed.iter().map(|(a, b)| format!("{a:.4}/{b:.4}")).collect();
    report(
        3,
        "grid-delay-ordering",
        pass,
        &format!(
            "mean test NMAE plan_net {plan:.4} < link_path_only {lpo:.4}; per seed {}; 300 train / 100 test at 16 dBm; {secs:.0} s",
            seeds.join(", ")
        ),
    );
    assert!(pass);
}

#[test]
fn c04_simulator_averaging_ladder() {
    let start = Instant::now();
    let spec = GeneratorSpec::default();
    let test_set = build_dataset(&spec, 120, derive_seed(4, "ladder")).unwrap();
    let preds = [Predictor::sim_avg(1), Predictor::sim_avg(2), Predictor::sim_avg(3)];
    let r = compare(&[EvalGroup { label: "grid", dataset: &test_set }], &preds, &[Kpi::Delay], 0.05).unwrap();
    let row = |k: usize| r.row(&format!("sim-avg-{k}"), Kpi::Delay, "grid").unwrap();
    let (a1, a2, a3) = (row(1), row(2), row(3));
    let p32 = signif_lower(&a3.errors, &a2.errors, 0.05).unwrap();
    let p21 = signif_lower(&a2.errors, &a1.errors, 0.05).unwrap();
    let secs = start.elapsed().as_secs_f64();
    let pass = test_set.len() >= 100
        && a3.nmae_mean <= a2.nmae_mean
        && a2.nmae_mean <= a1.nmae_mean
        && p32
        && p21
        && secs < 600.0;
    report(
        4,
        "simulator-averaging-ladder",
        pass,
        &format!(
            "delay NMAE avg-3 {:.4} <= avg-2 {:.4} <= avg-1 {:.4}; significant at 0.05: 3<2 {p32}, 2<1 {p21}; {} scenarios, {} pairs; {secs:.1} s",
            a3.nmae_mean,
            a2.nmae_mean,
            a1.nmae_mean,
            test_set.len(),
            a1.n
        ),
    );
    assert!(pass);
}

#[test]
fn c05_kpi_conservation() {
    let start = Instant::now();
    let mut checked = (0usize, 0usize);
    let mut violations = Vec::new();
    let families = [Family::Nsfnet, Family::Grid, Family::PerturbedGrid];
    let rates = [50.0, 75.0, 100.0, 125.0, 150.0];
    for (i, (family, rate)) in families.iter().flat_map(|f| rates.iter().map(move |r| (*f, *r))).enumerate() {
        let spec = GeneratorSpec { family, data_rate_kbps: rate, ..GeneratorSpec::default() };
        // 15 settings: 67 samples each, 1005 in total.
        let data = build_dataset(&spec, 67, derive_indexed(5, "sweep", i as u64)).unwrap();
        let sim = spec.sim_config();
        for s in &data.samples {
            checked.0 += 1;
            for k in &s.kpis {
                checked.1 += 1;
                if k.drops + k.rx_packets != k.tx_packets {
                    violations.push(format!("{family:?}@{rate}: {k:?}"));
                }
                let expect = k.rx_packets as f64 * sim.packet_size_bytes as f64 * 8.0 / sim.duration_s / 1000.0;
                let rel = (k.throughput_kbps - expect).abs() / expect.abs().max(f64::MIN_POSITIVE);
                if k.throughput_kbps != expect && rel > 1e-9 {
                    violations.push(format!("{family:?}@{rate}: throughput {} vs {expect}", k.throughput_kbps));
                }
            }
        }
    }
    let secs = start.elapsed().as_secs_f64();
    let pass = checked.0 >= 1000 && violations.is_empty() && secs < 300.0;
    report(
        5,
        "kpi-conservation",
        pass,
        &format!(
            "{} samples, {} flows, {} violations of drops + rx = tx or the throughput identity (1e-9 rel); {secs:.1} s",
            checked.0,
            checked.1,
            violations.len()
        ),
    );
    assert!(pass, "{:?}", &violations[..violations.len().min(5)]);
}

#[test]
fn c06_metric_units() {
    let some = |v: &[f64]| v.iter().map(|&x| Some(x)).collect::<Vec<_>>();
    let truth = [0.0, 1.0, 2.0, 3.0];
    let pred: Vec<f64> = truth.iter().map(|t| t + 1.0).collect();
    let unit = nmae(&some(&truth), &pred).unwrap();
    let zero = nmae(&some(&truth), &truth).unwrap();
    let mut rng_state = ndt::seed::rng(6);
    let mut worst = 0.0f64;
    for _ in 0..200 {
        use rand::Rng as _;
        let n = rng_state.gen_range(4..50);
        let t: Vec<f64> = (0..n).map(|_| rng_state.gen_range(-10.0..10.0)).collect();
        let p: Vec<f64> = t.iter().map(|x| x + rng_state.gen_range(-2.0..2.0)).collect();
        let c = rng_state.gen_range(1e-3..1e3);
        let base = nmae(&some(&t), &p).unwrap();
        let ts: Vec<f64> = t.iter().map(|x| c * x).collect();
        let ps: Vec<f64> = p.iter().map(|x| c * x).collect();
        worst = worst.max((nmae(&some(&ts), &ps).unwrap() - base).abs());
    }
    let pass = unit == 2.0 / 3.0 && zero == 0.0 && worst <= 1e-12;
    report(
        6,
        "metric-units",
        pass,
        &format!("NMAE(truth, truth + 1) = {unit} (exactly 2/3: {}); NMAE(truth, truth) = {zero}; rescaling drift {worst:.1e} <= 1e-12", unit == 2.0 / 3.0),
    );
    assert!(pass);
}

#[test]
fn c07_parameter_overhead() {
    let plan = PlanModel::new(ModelConfig::default(), FeatureScaling::default(), 0).unwrap().num_params();
    let lpo =
        PlanModel::new(ModelConfig::with_variant(Variant::LinkPathOnly), FeatureScaling::default(), 0).unwrap().num_params();
    let growth = (plan as f64 - lpo as f64) / lpo as f64;
    let counts_exact = plan == 78_033 && lpo == 68_817;
    let pass = counts_exact && growth < 0.09;
    report(
        7,
        "parameter-overhead",
        pass,
        &format!("plan_net {plan} vs link_path_only {lpo} parameters (exact counts match: {counts_exact}); growth {:.2}%, need < 9%", growth * 100.0),
    );
    assert!(counts_exact);
    assert!(growth < 0.09, "growth {:.4}", growth);
}

#[test]
fn c08_grid_density() {
    let counts: Vec<usize> = [12.0, 16.0, 20.0]
        .iter()
        .map(|&p| gen_grid(4, 4, 30.0, &RadioConfig::default().with_ptx(p)).unwrap().link_count())
        .collect();
    let pass = counts == [48, 84, 164];
    report(8, "grid-density", pass, &format!("|L| at 12/16/20 dBm = {counts:?}, expected [48, 84, 164], strictly increasing"));
    assert!(pass);
}

#[test]
fn c09_speed() {
    let start = Instant::now();
    let config = RunConfig::default();
    let (model, scenario, sim) = bench_inputs(&config).unwrap();
    let r = bench(&model, &scenario, &sim, config.bench.reps).unwrap();
    let secs = start.elapsed().as_secs_f64();
    let pass = r.nodes == 16 && r.sim_drops > 0 && r.ratio >= 100.0 && secs < 300.0;
    report(
        9,
        "speed",
        pass,
        &format!(
            "median forward {:.3e} s vs simulation {:.3e} s over {} reps: ratio {:.1}x, need >= 100x; {} nodes, {} links, {} drops; {secs:.1} s",
            r.forward_median_s, r.sim_median_s, r.reps, r.ratio, r.nodes, r.links, r.sim_drops
        ),
    );
    assert!(r.nodes == 16 && r.sim_drops > 0, "benchmark scenario is not a congested 16-node network");
    assert!(r.ratio >= 100.0, "ratio {:.1}", r.ratio);
}

fn ndt(args: &[&str]) {
    let status = Command::new(env!("CARGO_BIN_EXE_ndt")).args(args).status().unwrap();
    assert!(status.success(), "ndt {args:?} failed");
}

fn same_files(a: &Path, b: &Path, names: &[&str]) -> Vec<String> {
    names
        .iter()
        .filter(|n| std::fs::read(a.join(n)).unwrap() != std::fs::read(b.join(n)).unwrap())
        .map(|n| n.to_string())
        .collect()
}

fn same_config(a: &Path, b: &Path) -> bool {
    let load = |d: &Path| RunConfig { out: "".into(), ..RunConfig::load(&d.join("run_config.toml")).unwrap() };
    load(a) == load(b)
}

#[test]
fn c10_cli_determinism() {
    let dir = tempfile::tempdir().unwrap();
    let d = |n: &str| dir.path().join(n);
    let s = |p: &Path| p.to_str().unwrap().to_string();
    let (d1, d2, t1, t2) = (d("data1"), d("data2"), d("train1"), d("train2"));

    ndt(&["dataset", "--family", "grid", "--n", "40", "--seed", "10", "--workers", "1", "--out", &s(&d1)]);
    ndt(&["dataset", "--config", &s(&d1.join("run_config.toml")), "--out", &s(&d2)]);
    let data_diffs = same_files(&d1, &d2, &["dataset.jsonl", "dataset.jsonl.meta.json"]);

    let data = s(&d1.join("dataset.jsonl"));
    ndt(&["train", "--dataset", &data, "--epochs", "4", "--patience", "4", "--seed", "3", "--workers", "1", "--out", &s(&t1)]);
    ndt(&["train", "--config", &s(&t1.join("run_config.toml")), "--out", &s(&t2)]);
    let mut files = vec!["curves.csv".to_string()];
    for k in 0..3 {
        files.push(format!("fold{k}.ckpt"));
        files.push(format!("fold{k}.json"));
    }
    let names: Vec<&str> = files.iter().map(String::as_str).collect();
    let train_diffs = same_files(&t1, &t2, &names);
    let configs = same_config(&d1, &d2) && same_config(&t1, &t2);

    let pass = data_diffs.is_empty() && train_diffs.is_empty() && configs;
    report(
        10,
        "cli-determinism",
        pass,
        &format!(
            "reruns from the emitted run_config.toml: dataset differing files {data_diffs:?}, train differing files {train_diffs:?}, resolved configs equal {configs}"
        ),
    );
    assert!(pass);
}
