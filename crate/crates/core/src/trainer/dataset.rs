use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use log::warn;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{io_error, Result, TrainError};
use crate::netmodel::{
    gen_grid_with_capacity, gen_nsfnet_with_capacity, max_link_distance, perturb,
    sample_traffic_matrix, select_path_pairs, shortest_path, NetworkGraph, OnOff, PathSpec,
    RadioConfig, Scenario, TrafficMatrix, DEFAULT_MEAN_SET, WIRED_CAPACITY_KBPS,
    WIRELESS_CAPACITY_KBPS,
};
use crate::plannet::FeatureScaling;
use crate::seed;
use crate::simcore::{simulate, FlowKpis, SimConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Family {
    Nsfnet,
    Grid,
    PerturbedGrid,
}

impl Family {
    pub fn name(self) -> &'static str {
        match self {
            Family::Nsfnet => "nsfnet",
            Family::Grid => "grid",
            Family::PerturbedGrid => "perturbed-grid",
        }
    }

    pub fn is_wireless(self) -> bool {
        self != Family::Nsfnet
    }
}

impl std::str::FromStr for Family {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        [Family::Nsfnet, Family::Grid, Family::PerturbedGrid]
            .into_iter()
            .find(|f| f.name() == s)
            .ok_or_else(|| format!("unknown topology family '{s}' (expected nsfnet, grid or perturbed-grid)"))
    }
}

/// Everything needed to reproduce a dataset apart from its seed and size.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GeneratorSpec {
    pub family: Family,
    pub rows: usize,
    pub cols: usize,
    pub spacing_m: f64,
    pub radio: RadioConfig,
    pub perturb_radius_m: f64,
    /// Link capacity; the family default when absent.
    pub capacity_kbps: Option<f64>,
    pub num_paths: usize,
    pub max_hops: usize,
    /// Seed of the source/destination pair draw, shared by every sample.
    pub pair_seed: u64,
    pub mean_set: Vec<f64>,
    pub data_rate_kbps: f64,
    /// Simulator settings; the seed is replaced per sample and wireless
    /// families fill in the interference radius from the radio when unset.
    pub sim: SimConfig,
}

impl Default for GeneratorSpec {
    fn default() -> Self {
        Self {
            family: Family::Grid,
            rows: 4,
            cols: 4,
            spacing_m: 30.0,
            radio: RadioConfig::default(),
            perturb_radius_m: 10.0,
            capacity_kbps: None,
            num_paths: 10,
            max_hops: 3,
            pair_seed: 0,
            mean_set: DEFAULT_MEAN_SET.to_vec(),
            data_rate_kbps: 100.0,
            sim: SimConfig::default(),
        }
    }
}

impl GeneratorSpec {
    pub fn capacity(&self) -> f64 {
        self.capacity_kbps.unwrap_or(if self.family.is_wireless() {
            WIRELESS_CAPACITY_KBPS
        } else {
            WIRED_CAPACITY_KBPS
        })
    }

    /// Unperturbed topology the path pairs are drawn on.
    pub fn base_graph(&self) -> Result<NetworkGraph> {
        Ok(match self.family {
            Family::Nsfnet => gen_nsfnet_with_capacity(self.capacity()),
            Family::Grid | Family::PerturbedGrid => {
                gen_grid_with_capacity(self.rows, self.cols, self.spacing_m, &self.radio, self.capacity())?
            }
        })
    }

    pub fn sim_config(&self) -> SimConfig {
        let mut sim = self.sim.clone();
        if self.family.is_wireless() && sim.interference_radius_m.is_none() {
            sim.interference_radius_m = Some(max_link_distance(&self.radio));
        }
        if !self.family.is_wireless() {
            sim.interference_radius_m = None;
        }
        sim
    }

    pub fn validate(&self) -> Result<()> {
        self.radio.validate()?;
        self.sim_config().validate()?;
        if self.num_paths == 0 || self.max_hops == 0 {
            return Err(TrainError::InvalidArgument("need at least one path of at least one hop".into()));
        }
        if !(self.perturb_radius_m >= 0.0) {
            return Err(TrainError::InvalidArgument("perturbation radius must be non-negative".into()));
        }
        TrafficMatrix::new(vec![OnOff { tau_on: 1.0, tau_off: 1.0 }], self.data_rate_kbps)?;
        Ok(())
    }

    pub fn hash(&self) -> String {
        seed::hash_str(&serde_json::to_string(self).expect("spec serializes"))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub scenario: Scenario,
    pub kpis: Vec<FlowKpis>,
    /// Seed the sample was generated from; simulation replays derive from it.
    pub seed: u64,
}

/// One JSON Lines row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleRecord {
    pub topology: NetworkGraph,
    pub paths: Vec<Vec<usize>>,
    pub traffic: Vec<[f64; 2]>,
    pub data_rate_kbps: f64,
    pub kpis: Vec<FlowKpis>,
    pub seed: u64,
}

impl From<&Sample> for SampleRecord {
    fn from(s: &Sample) -> Self {
        Self {
            topology: s.scenario.graph.clone(),
            paths: s.scenario.paths.iter().map(|p| p.links.clone()).collect(),
            traffic: s.scenario.traffic.rows.iter().map(|r| [r.tau_on, r.tau_off]).collect(),
            data_rate_kbps: s.scenario.traffic.data_rate_kbps,
            kpis: s.kpis.clone(),
            seed: s.seed,
        }
    }
}

impl TryFrom<SampleRecord> for Sample {
    type Error = TrainError;

    fn try_from(r: SampleRecord) -> Result<Self> {
        let graph = r.topology;
        let paths = r.paths.into_iter().map(|l| PathSpec::from_links(&graph, l)).collect::<std::result::Result<_, _>>()?;
        let rows = r.traffic.iter().map(|&[tau_on, tau_off]| OnOff { tau_on, tau_off }).collect();
        let scenario = Scenario::new(graph, paths, TrafficMatrix::new(rows, r.data_rate_kbps)?)?;
        if r.kpis.len() != scenario.path_count() {
            return Err(TrainError::Format(format!(
                "{} KPI entries for {} paths",
                r.kpis.len(),
                scenario.path_count()
            )));
        }
        Ok(Self { scenario, kpis: r.kpis, seed: r.seed })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetMeta {
    pub family: Family,
    pub data_rate_kbps: f64,
    pub seed: u64,
    pub requested: usize,
    pub skipped: usize,
    pub sim_config_hash: String,
    pub generator_hash: String,
    pub generator: GeneratorSpec,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub samples: Vec<Sample>,
    pub meta: DatasetMeta,
}

/// `<file>.meta.json` next to a dataset file.
pub fn meta_path(path: &Path) -> PathBuf {
    let mut name = path.file_name().unwrap_or_default().to_os_string();
    name.push(".meta.json");
    path.with_file_name(name)
}

fn make_sample(spec: &GeneratorSpec, base: &NetworkGraph, pairs: &[(usize, usize)], sample_seed: u64) -> Result<Sample> {
    let graph = match spec.family {
        Family::PerturbedGrid => {
            perturb(base, spec.perturb_radius_m, &spec.radio, seed::derive_seed(sample_seed, "topology"))
        }
        _ => base.clone(),
    };
    let paths = pairs.iter().map(|&(s, d)| shortest_path(&graph, s, d)).collect::<std::result::Result<Vec<_>, _>>()?;
    let traffic = sample_traffic_matrix(
        pairs.len(),
        &spec.mean_set,
        spec.data_rate_kbps,
        seed::derive_seed(sample_seed, "traffic"),
    )?;
    let scenario = Scenario::new(graph, paths, traffic)?;
    let sim = spec.sim_config().with_seed(seed::derive_seed(sample_seed, "sim"));
    let kpis = simulate(&scenario.graph, &scenario.paths, &scenario.traffic, &sim)?;
    Ok(Sample { scenario, kpis, seed: sample_seed })
}

/// Simulates `n` samples in parallel. Sample `i` depends only on
/// `(spec, seed, i)`, so the result does not depend on the worker count.
pub fn build_dataset(spec: &GeneratorSpec, n: usize, seed_value: u64) -> Result<Dataset> {
    spec.validate()?;
    let base = spec.base_graph()?;
    let pairs = select_path_pairs(&base, spec.num_paths, spec.max_hops, spec.pair_seed)?;
    let results: Vec<Result<Sample>> = (0..n)
        .into_par_iter()
        .map(|i| make_sample(spec, &base, &pairs, seed::derive_indexed(seed_value, "sample", i as u64)))
        .collect();
    let mut samples = Vec::with_capacity(n);
    let mut skipped = 0;
    for (i, r) in results.into_iter().enumerate() {
        match r {
            Ok(s) => samples.push(s),
            Err(e) => {
                warn!("sample {i} skipped: {e}");
                skipped += 1;
            }
        }
    }
    // More than 1% lost.
    if skipped * 100 > n {
        return Err(TrainError::TooManySkips { skipped, requested: n });
    }
    let sim_json = serde_json::to_string(&spec.sim_config()).expect("config serializes");
    Ok(Dataset {
        samples,
        meta: DatasetMeta {
            family: spec.family,
            data_rate_kbps: spec.data_rate_kbps,
            seed: seed_value,
            requested: n,
            skipped,
            sim_config_hash: seed::hash_str(&sim_json),
            generator_hash: spec.hash(),
            generator: spec.clone(),
        },
    })
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn scenarios(&self) -> Vec<&Scenario> {
        self.samples.iter().map(|s| &s.scenario).collect()
    }

    /// Subset in the given index order, sharing the metadata.
    pub fn subset(&self, idx: &[usize]) -> Dataset {
        Dataset { samples: idx.iter().map(|&i| self.samples[i].clone()).collect(), meta: self.meta.clone() }
    }

    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for s in &self.samples {
            out.push_str(&serde_json::to_string(&SampleRecord::from(s)).expect("record serializes"));
            out.push('\n');
        }
        out
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let file = fs::File::create(path).map_err(io_error(path))?;
        let mut w = BufWriter::new(file);
        for s in &self.samples {
            let line = serde_json::to_string(&SampleRecord::from(s)).expect("record serializes");
            writeln!(w, "{line}").map_err(io_error(path))?;
        }
        w.flush().map_err(io_error(path))?;
        let meta = meta_path(path);
        let json = serde_json::to_string_pretty(&self.meta).expect("metadata serializes");
        fs::write(&meta, json + "\n").map_err(io_error(&meta))
    }

    pub fn read(path: &Path) -> Result<Dataset> {
        let meta_file = meta_path(path);
        let text = fs::read_to_string(&meta_file).map_err(io_error(&meta_file))?;
        let meta: DatasetMeta =
            serde_json::from_str(&text).map_err(|e| TrainError::Format(format!("{}: {e}", meta_file.display())))?;
        if meta.generator.hash() != meta.generator_hash {
            return Err(TrainError::Format(format!("{}: generator hash mismatch", meta_file.display())));
        }
        let file = fs::File::open(path).map_err(io_error(path))?;
        let mut samples = Vec::new();
        for (n, line) in BufReader::new(file).lines().enumerate() {
            let line = line.map_err(io_error(path))?;
            if line.trim().is_empty() {
                continue;
            }
            let record: SampleRecord = serde_json::from_str(&line)
                .map_err(|e| TrainError::Format(format!("{} line {}: {e}", path.display(), n + 1)))?;
            samples.push(Sample::try_from(record)?);
        }
        Ok(Dataset { samples, meta })
    }
}

/// Input scales for a dataset: τ over 20, capacities over the largest
/// capacity and degrees over the largest out-degree seen.
pub fn scaling_for(data: &Dataset) -> FeatureScaling {
    let mut cap: f64 = 0.0;
    let mut deg: usize = 0;
    for s in &data.samples {
        let g = &s.scenario.graph;
        cap = g.links().iter().fold(cap, |m, l| m.max(l.capacity_kbps));
        deg = (0..g.node_count()).fold(deg, |m, n| m.max(g.out_degree(n)));
    }
    let defaults = FeatureScaling::default();
    FeatureScaling {
        tau: defaults.tau,
        capacity_kbps: if cap > 0.0 { cap } else { defaults.capacity_kbps },
        degree: if deg > 0 { deg as f64 } else { defaults.degree },
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn quick(family: Family) -> GeneratorSpec {
        GeneratorSpec {
            family,
            sim: SimConfig { duration_s: 2.0, ..SimConfig::default() },
            ..GeneratorSpec::default()
        }
    }

    #[test]
    fn empty_dataset() {
        let d = build_dataset(&quick(Family::Grid), 0, 1).unwrap();
        assert!(d.is_empty());
        assert_eq!(d.to_jsonl(), "");
    }

    #[test]
    fn nsfnet_samples_have_ten_paths_and_listed_means() {
        let d = build_dataset(&quick(Family::Nsfnet), 100, 2).unwrap();
        assert_eq!(d.len(), 100);
        for s in &d.samples {
            assert_eq!(s.scenario.path_count(), 10);
            assert_eq!(s.kpis.len(), 10);
            assert!(s.scenario.paths.iter().all(|p| (1..=3).contains(&p.hop_count())));
            for r in &s.scenario.traffic.rows {
                assert!([1.0, 10.0, 20.0].contains(&r.tau_on) && [1.0, 10.0, 20.0].contains(&r.tau_off));
            }
        }
        assert_eq!(d.meta.data_rate_kbps, 100.0);
        assert!(d.meta.generator.sim_config().interference_radius_m.is_none());
    }

    #[test]
    fn same_seed_same_bytes_across_thread_counts() {
        let spec = quick(Family::PerturbedGrid);
        let a = build_dataset(&spec, 12, 3).unwrap();
        let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let b = pool.install(|| build_dataset(&spec, 12, 3).unwrap());
        assert_eq!(a.to_jsonl(), b.to_jsonl());
        assert_ne!(a.to_jsonl(), build_dataset(&spec, 12, 4).unwrap().to_jsonl());
        // Perturbation moves nodes per sample while the pairs stay fixed.
        assert_ne!(a.samples[0].scenario.graph, a.samples[1].scenario.graph);
        let ends = |s: &Sample| s.scenario.paths.iter().map(|p| (p.source, p.destination)).collect::<Vec<_>>();
        assert_eq!(ends(&a.samples[0]), ends(&a.samples[1]));
    }

    #[test]
    fn file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("d.jsonl");
        let d = build_dataset(&quick(Family::Grid), 5, 5).unwrap();
        d.write(&path).unwrap();
        assert!(meta_path(&path).ends_with("d.jsonl.meta.json"));
        let back = Dataset::read(&path).unwrap();
        assert_eq!(back, d);
        let first = fs::read_to_string(&path).unwrap();
        let row: serde_json::Value = serde_json::from_str(first.lines().next().unwrap()).unwrap();
        for key in ["topology", "paths", "traffic", "data_rate_kbps", "kpis", "seed"] {
            assert!(row.get(key).is_some(), "{key}");
        }
        assert!(row["kpis"][0].get("tx").is_some());
    }

    #[test]
    fn scaling_tracks_the_data() {
        let d = build_dataset(&quick(Family::Grid), 2, 6).unwrap();
        let s = scaling_for(&d);
        assert_eq!(s.capacity_kbps, 6000.0);
        assert_eq!(s.degree, 8.0);
        assert_eq!(s.tau, 20.0);
    }
}
