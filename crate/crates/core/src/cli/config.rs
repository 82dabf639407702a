//! Resolved run configuration and its TOML file form.
//!
//! Resolution order is flags, then the `--config` file, then defaults. Every
//! command writes the resolved result to `<out>/run_config.toml`, which can be
//! passed back as `--config` to repeat the run.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::Context;
use serde::{Deserialize, Serialize};

use crate::plannet::ModelConfig;
use crate::simcore::Kpi;
use crate::trainer::{GeneratorSpec, TrainConfig};

pub const RUN_CONFIG_FILE: &str = "run_config.toml";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    pub seed: u64,
    /// Worker threads; all available cores when absent.
    pub workers: Option<usize>,
    pub out: PathBuf,
    /// Topology, traffic and simulator settings shared by `topology`,
    /// `dataset` and `bench`.
    pub generator: GeneratorSpec,
    pub dataset: DatasetParams,
    pub train: TrainParams,
    pub eval: EvalParams,
    pub bench: BenchParams,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            workers: None,
            out: PathBuf::from("out"),
            generator: GeneratorSpec::default(),
            dataset: DatasetParams::default(),
            train: TrainParams::default(),
            eval: EvalParams::default(),
            bench: BenchParams::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DatasetParams {
    pub n: usize,
}

impl Default for DatasetParams {
    fn default() -> Self {
        Self { n: 300 }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainParams {
    pub dataset: Option<PathBuf>,
    pub model: ModelConfig,
    /// Its `seed` is overwritten by the global seed.
    pub config: TrainConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EvalParams {
    pub datasets: Vec<PathBuf>,
    /// Directories holding `fold*.ckpt` files of one training run.
    pub models: Vec<PathBuf>,
    pub sim_avg: Vec<usize>,
    pub ground_truth: bool,
    /// KPIs to score; those of the models (or delay alone) when empty.
    pub kpis: Vec<Kpi>,
    pub alpha: f64,
}

impl Default for EvalParams {
    fn default() -> Self {
        Self {
            datasets: Vec::new(),
            models: Vec::new(),
            sim_avg: Vec::new(),
            ground_truth: false,
            kpis: Vec::new(),
            alpha: crate::evalkit::DEFAULT_ALPHA,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BenchParams {
    /// Trained model directory; an untrained default plan_net otherwise.
    pub model: Option<PathBuf>,
    pub reps: usize,
    /// Offered load of the benchmark scenario; high enough to build queues.
    pub data_rate_kbps: f64,
}

impl Default for BenchParams {
    fn default() -> Self {
        Self { model: None, reps: 20, data_rate_kbps: 1000.0 }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        toml::from_str(&text).with_context(|| format!("parsing {}", path.display()))
    }

    pub fn to_toml(&self) -> anyhow::Result<String> {
        toml::to_string(self).context("serializing run configuration")
    }

    /// Creates the output directory and writes the resolved configuration.
    pub fn write(&self) -> anyhow::Result<PathBuf> {
        fs::create_dir_all(&self.out).with_context(|| format!("creating {}", self.out.display()))?;
        let path = self.out.join(RUN_CONFIG_FILE);
        fs::write(&path, self.to_toml()?).with_context(|| format!("writing {}", path.display()))?;
        Ok(path)
    }
}
