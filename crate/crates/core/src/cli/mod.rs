//! The `ndt` command line: topology, dataset, train, eval and bench.
//!
//! Exit codes are 0 on success, 2 on usage errors and 1 on runtime failures.

mod bench;
mod config;

use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};
use log::warn;

pub use bench::{bench, BenchReport, MIN_REPS};
pub use config::{BenchParams, DatasetParams, EvalParams, RunConfig, TrainParams, RUN_CONFIG_FILE};

use crate::evalkit::{compare, EvalGroup, Predictor};
use crate::netmodel::{perturb, Scenario};
use crate::plannet::{ModelConfig, PlanModel, Variant};
use crate::seed;
use crate::simcore::{Kpi, SimConfig};
use crate::trainer::{build_dataset, scaling_for, train, Dataset, Ensemble, Family, FoldModel, GeneratorSpec};

/// A problem with how the command was invoked; maps to exit code 2.
#[derive(Debug, thiserror::Error)]
#[error("{0}")]
pub struct UsageError(pub String);

fn usage(msg: impl Into<String>) -> anyhow::Error {
    UsageError(msg.into()).into()
}

pub fn exit_code(err: &anyhow::Error) -> i32 {
    if err.downcast_ref::<UsageError>().is_some() {
        2
    } else {
        1
    }
}

#[derive(Debug, Parser)]
#[command(name = "ndt", version, about = "Network digital twin: simulate, train and evaluate KPI predictors")]
pub struct Cli {
    /// TOML run configuration; flags override its values.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Worker threads for sample-level parallelism; 1 for strict determinism.
    #[arg(long, global = true)]
    pub workers: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write a topology as JSON and print its size.
    Topology(TopologyArgs),
    /// Simulate a dataset of scenarios.
    Dataset(DatasetArgs),
    /// Cross-validated training of one model variant on one KPI.
    Train(TrainArgs),
    /// Score predictors on test datasets.
    Eval(EvalArgs),
    /// Time a model forward pass against a simulation run.
    Bench(BenchArgs),
}

#[derive(Debug, Args)]
pub struct GeneratorArgs {
    #[arg(long)]
    pub family: Option<Family>,
    #[arg(long)]
    pub rows: Option<usize>,
    #[arg(long)]
    pub cols: Option<usize>,
    /// Grid spacing in meters.
    #[arg(long)]
    pub spacing: Option<f64>,
    /// Transmit power in dBm.
    #[arg(long)]
    pub ptx: Option<f64>,
    /// Per-source data rate while on, kb/s.
    #[arg(long)]
    pub rate: Option<f64>,
    /// Number of source/destination paths.
    #[arg(long)]
    pub paths: Option<usize>,
    /// Simulated seconds per sample.
    #[arg(long)]
    pub duration: Option<f64>,
}

impl GeneratorArgs {
    fn apply(&self, g: &mut GeneratorSpec) {
        if let Some(v) = self.family {
            g.family = v;
        }
        if let Some(v) = self.rows {
            g.rows = v;
        }
        if let Some(v) = self.cols {
            g.cols = v;
        }
        if let Some(v) = self.spacing {
            g.spacing_m = v;
        }
        if let Some(v) = self.ptx {
            g.radio.ptx_dbm = v;
        }
        if let Some(v) = self.rate {
            g.data_rate_kbps = v;
        }
        if let Some(v) = self.paths {
            g.num_paths = v;
        }
        if let Some(v) = self.duration {
            g.sim.duration_s = v;
        }
    }
}

#[derive(Debug, Args)]
pub struct TopologyArgs {
    #[command(flatten)]
    pub generator: GeneratorArgs,
}

#[derive(Debug, Args)]
pub struct DatasetArgs {
    /// Number of samples.
    #[arg(long)]
    pub n: Option<usize>,
    #[command(flatten)]
    pub generator: GeneratorArgs,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Training dataset (JSON Lines with its `.meta.json`).
    #[arg(long)]
    pub dataset: Option<PathBuf>,
    #[arg(long)]
    pub variant: Option<Variant>,
    #[arg(long)]
    pub kpi: Option<Kpi>,
    #[arg(long)]
    pub folds: Option<usize>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long)]
    pub l2: Option<f64>,
    #[arg(long)]
    pub patience: Option<usize>,
    /// Reuse one set of update weights for every message-passing round.
    #[arg(long)]
    pub share_weights: bool,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// Test dataset; repeat for several report groups (named by file stem).
    #[arg(long = "dataset")]
    pub datasets: Vec<PathBuf>,
    /// Directory of a training run; `name=dir` sets the report name.
    #[arg(long = "model")]
    pub models: Vec<PathBuf>,
    /// Simulator-averaging predictors, e.g. `--sim-avg 1,2,3`.
    #[arg(long, value_delimiter = ',')]
    pub sim_avg: Vec<usize>,
    /// Include the ground truth itself as a predictor.
    #[arg(long)]
    pub ground_truth: bool,
    #[arg(long = "kpi", value_delimiter = ',')]
    pub kpis: Vec<Kpi>,
    #[arg(long)]
    pub alpha: Option<f64>,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    /// Directory of a training run; its first fold model is timed.
    #[arg(long)]
    pub model: Option<PathBuf>,
    #[arg(long)]
    pub reps: Option<usize>,
    #[command(flatten)]
    pub generator: GeneratorArgs,
}

impl Cli {
    /// Resolves flags over the config file over defaults.
    pub fn resolve(&self) -> anyhow::Result<RunConfig> {
        let mut c = match &self.config {
            Some(path) => RunConfig::load(path)?,
            None => RunConfig::default(),
        };
        if let Some(v) = self.seed {
            c.seed = v;
        }
        if let Some(v) = &self.out {
            c.out = v.clone();
        }
        if let Some(v) = self.workers {
            if v == 0 {
                return Err(usage("--workers must be at least 1"));
            }
            c.workers = Some(v);
        }
        match &self.command {
            Command::Topology(a) => {
                if a.generator.family.is_none() && self.config.is_none() {
                    return Err(usage("topology needs --family (nsfnet, grid or perturbed-grid)"));
                }
                a.generator.apply(&mut c.generator);
            }
            Command::Dataset(a) => {
                a.generator.apply(&mut c.generator);
                if let Some(n) = a.n {
                    c.dataset.n = n;
                }
            }
            Command::Train(a) => {
                if let Some(v) = &a.dataset {
                    c.train.dataset = Some(v.clone());
                }
                let (m, t) = (&mut c.train.model, &mut c.train.config);
                if let Some(v) = a.variant {
                    m.variant = v;
                }
                if a.share_weights {
                    m.share_weights_across_iterations = true;
                }
                if let Some(v) = a.kpi {
                    t.kpi = v;
                }
                if let Some(v) = a.folds {
                    t.folds = v;
                }
                if let Some(v) = a.epochs {
                    t.epochs = v;
                }
                if let Some(v) = a.batch_size {
                    t.batch_size = v;
                }
                if let Some(v) = a.lr {
                    t.lr = v;
                }
                if let Some(v) = a.l2 {
                    t.l2_lambda = v;
                }
                if let Some(v) = a.patience {
                    t.patience = v;
                }
                if c.train.dataset.is_none() {
                    return Err(usage("train needs --dataset"));
                }
            }
            Command::Eval(a) => {
                let e = &mut c.eval;
                if !a.datasets.is_empty() {
                    e.datasets = a.datasets.clone();
                }
                if !a.models.is_empty() {
                    e.models = a.models.clone();
                }
                if !a.sim_avg.is_empty() {
                    e.sim_avg = a.sim_avg.clone();
                }
                if a.ground_truth {
                    e.ground_truth = true;
                }
                if !a.kpis.is_empty() {
                    e.kpis = a.kpis.clone();
                }
                if let Some(v) = a.alpha {
                    e.alpha = v;
                }
                if e.datasets.is_empty() {
                    return Err(usage("eval needs at least one --dataset"));
                }
                if e.models.is_empty() && e.sim_avg.is_empty() && !e.ground_truth {
                    return Err(usage("eval needs at least one predictor (--model, --sim-avg or --ground-truth)"));
                }
                if e.sim_avg.contains(&0) {
                    return Err(usage("--sim-avg run counts must be positive"));
                }
            }
            Command::Bench(a) => {
                a.generator.apply(&mut c.generator);
                if let Some(v) = &a.model {
                    c.bench.model = Some(v.clone());
                }
                if let Some(v) = a.reps {
                    c.bench.reps = v;
                }
                if a.generator.rate.is_some() {
                    c.bench.data_rate_kbps = c.generator.data_rate_kbps;
                }
                if c.bench.reps < MIN_REPS {
                    return Err(usage(format!("bench needs at least {MIN_REPS} repetitions")));
                }
            }
        }
        // One global seed drives every command.
        c.train.config.seed = c.seed;
        Ok(c)
    }
}

pub fn run(cli: &Cli) -> anyhow::Result<()> {
    let config = cli.resolve()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.workers.unwrap_or(0))
        .build()
        .context("starting worker pool")?;
    pool.install(|| match &cli.command {
        Command::Topology(_) => cmd_topology(&config),
        Command::Dataset(_) => cmd_dataset(&config),
        Command::Train(_) => cmd_train(&config),
        Command::Eval(_) => cmd_eval(&config),
        Command::Bench(_) => cmd_bench(&config),
    })
}

fn write_file(path: &Path, contents: &str) -> anyhow::Result<()> {
    fs::write(path, contents).with_context(|| format!("writing {}", path.display()))
}

pub fn cmd_topology(c: &RunConfig) -> anyhow::Result<()> {
    let g = &c.generator;
    g.validate()?;
    let mut graph = g.base_graph()?;
    if g.family == Family::PerturbedGrid {
        graph = perturb(&graph, g.perturb_radius_m, &g.radio, seed::derive_seed(c.seed, "topology"));
    }
    c.write()?;
    let path = c.out.join("topology.json");
    write_file(&path, &graph.to_json())?;
    println!("{}: {} nodes, {} links -> {}", g.family.name(), graph.node_count(), graph.link_count(), path.display());
    Ok(())
}

pub fn cmd_dataset(c: &RunConfig) -> anyhow::Result<()> {
    let data = build_dataset(&c.generator, c.dataset.n, c.seed)?;
    c.write()?;
    let path = c.out.join("dataset.jsonl");
    data.write(&path)?;
    let mut summary = format!("{} samples ({} skipped) -> {}", data.len(), data.meta.skipped, path.display());
    for kpi in Kpi::ALL {
        let values: Vec<f64> = data.samples.iter().flat_map(|s| s.kpis.iter().filter_map(|k| kpi.of(k))).collect();
        if let (Some(lo), Some(hi)) = (
            values.iter().copied().reduce(f64::min),
            values.iter().copied().reduce(f64::max),
        ) {
            summary.push_str(&format!("; {kpi} [{lo:.4}, {hi:.4}]"));
        }
    }
    println!("{summary}");
    Ok(())
}

pub fn cmd_train(c: &RunConfig) -> anyhow::Result<()> {
    let path = c.train.dataset.as_ref().expect("resolved");
    let data = Dataset::read(path)?;
    let outcome = train(&data, &c.train.model, &c.train.config)?;
    c.write()?;
    let ckpts = outcome.save(&c.out)?;
    for (f, p) in outcome.folds.iter().zip(&ckpts) {
        println!(
            "fold {}: best epoch {} val MAE {:.6} -> {}",
            f.fold,
            f.best_epoch,
            f.best_val_mae,
            p.display()
        );
    }
    Ok(())
}

/// `fold*.ckpt` files of a training directory in fold order.
pub fn fold_checkpoints(dir: &Path) -> anyhow::Result<Vec<PathBuf>> {
    let mut found: Vec<(usize, PathBuf)> = Vec::new();
    for entry in fs::read_dir(dir).with_context(|| format!("reading {}", dir.display()))? {
        let path = entry?.path();
        let name = path.file_name().and_then(|n| n.to_str()).unwrap_or_default();
        if let Some(k) = name.strip_prefix("fold").and_then(|r| r.strip_suffix(".ckpt")) {
            if let Ok(k) = k.parse() {
                found.push((k, path));
            }
        }
    }
    if found.is_empty() {
        bail!("no fold checkpoints in {}", dir.display());
    }
    found.sort();
    Ok(found.into_iter().map(|(_, p)| p).collect())
}

fn split_name(spec: &Path) -> (Option<String>, PathBuf) {
    let text = spec.to_string_lossy();
    match text.split_once('=') {
        Some((name, dir)) if !name.is_empty() => (Some(name.to_string()), PathBuf::from(dir)),
        _ => (None, spec.to_path_buf()),
    }
}

pub fn cmd_eval(c: &RunConfig) -> anyhow::Result<()> {
    let e = &c.eval;
    let mut datasets = Vec::new();
    for path in &e.datasets {
        let label = path.file_stem().and_then(|s| s.to_str()).unwrap_or("test").to_string();
        datasets.push((label, Dataset::read(path)?));
    }
    let labels: BTreeSet<&str> = datasets.iter().map(|(l, _)| l.as_str()).collect();
    if labels.len() != datasets.len() {
        return Err(usage("test datasets need distinct file names; they label the report groups"));
    }

    let mut predictors = Vec::new();
    let mut notes = Vec::new();
    if e.ground_truth {
        predictors.push(Predictor::ground_truth());
    }
    for &runs in &e.sim_avg {
        predictors.push(Predictor::sim_avg(runs));
    }
    for spec in &e.models {
        let (name, dir) = split_name(spec);
        let loaded = fold_checkpoints(&dir).and_then(|ckpts| Ok(Ensemble::load(&ckpts)?));
        match loaded {
            Ok(ensemble) => {
                let name = name.unwrap_or_else(|| ensemble.variant().name().to_string());
                if predictors.iter().any(|p: &Predictor| p.name == name) {
                    return Err(usage(format!("two predictors are named {name}; use --model name=dir")));
                }
                predictors.push(Predictor::model(name, ensemble));
            }
            Err(err) => {
                let note = format!("{}: skipped: {err:#}", dir.display());
                warn!("{note}");
                notes.push(note);
            }
        }
    }
    if predictors.is_empty() {
        bail!("no usable predictors");
    }
    let kpis = if e.kpis.is_empty() {
        let mut from_models: Vec<Kpi> = Vec::new();
        for p in &predictors {
            if let crate::evalkit::PredictorKind::Model(m) = &p.kind {
                if !from_models.contains(&m.kpi()) {
                    from_models.push(m.kpi());
                }
            }
        }
        if from_models.is_empty() {
            vec![Kpi::Delay]
        } else {
            from_models
        }
    } else {
        e.kpis.clone()
    };

    let groups: Vec<EvalGroup> = datasets.iter().map(|(l, d)| EvalGroup { label: l, dataset: d }).collect();
    let mut report = compare(&groups, &predictors, &kpis, e.alpha)?;
    notes.append(&mut report.notes);
    report.notes = notes;
    c.write()?;
    write_file(&c.out.join("report.csv"), &report.to_csv())?;
    write_file(&c.out.join("report.json"), &report.to_json())?;
    write_file(&c.out.join("box.csv"), &report.box_csv())?;
    print!("{}", report.ordering_summary());
    Ok(())
}

/// Model, congested scenario and simulator settings timed by `bench`.
pub fn bench_inputs(c: &RunConfig) -> anyhow::Result<(FoldModel, Scenario, SimConfig)> {
    let spec = GeneratorSpec { data_rate_kbps: c.bench.data_rate_kbps, ..c.generator.clone() };
    let data = build_dataset(&spec, 1, seed::derive_seed(c.seed, "bench"))?;
    let Some(sample) = data.samples.first() else { bail!("benchmark scenario failed to simulate") };
    let model = match &c.bench.model {
        Some(dir) => FoldModel::load(&fold_checkpoints(dir)?[0])?,
        None => FoldModel {
            model: PlanModel::new(ModelConfig::default(), scaling_for(&data), seed::derive_seed(c.seed, "bench-model"))?,
            kpi: Kpi::Delay,
            target_mean: 0.0,
            target_std: 1.0,
        },
    };
    let sim = spec.sim_config().with_seed(seed::derive_seed(c.seed, "bench-sim"));
    Ok((model, sample.scenario.clone(), sim))
}

pub fn cmd_bench(c: &RunConfig) -> anyhow::Result<()> {
    let (model, scenario, sim) = bench_inputs(c)?;
    let r = bench(&model, &scenario, &sim, c.bench.reps)?;
    c.write()?;
    write_file(&c.out.join("bench.json"), &(serde_json::to_string_pretty(&r)? + "\n"))?;
    println!(
        "{} nodes, {} links, {} paths, {} drops; forward {:.3e} s, simulation {:.3e} s (medians of {}); ratio {:.1}x",
        r.nodes, r.links, r.paths, r.sim_drops, r.forward_median_s, r.sim_median_s, r.reps, r.ratio
    );
    Ok(())
}
