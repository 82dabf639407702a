use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::batch::Batch;
use super::features::EmbeddingState;
use super::{FeatureScaling, ModelConfig, PlanError, Result, Variant};
use crate::autodiff::{
    read_checkpoint, weighted_graph_conv, write_checkpoint, Activation, GcnParams, GruParams,
    Mlp, ParamStore, Tape, Tensor, Var,
};
use crate::netmodel::Scenario;
use crate::seed;

#[derive(Debug, Clone, PartialEq)]
struct RoundParams {
    gru: GruParams,
    link_mlp: Mlp,
    gcn: Option<GcnParams>,
}

#[derive(Debug, Clone, PartialEq)]
enum Layout {
    MessagePassing { rounds: Vec<RoundParams>, readout: Mlp },
    Generic { convs: [GcnParams; 2], readout: Mlp },
}

/// Model weights plus the structure that interprets them.
#[derive(Debug, Clone, PartialEq)]
pub struct PlanModel {
    config: ModelConfig,
    scaling: FeatureScaling,
    store: ParamStore,
    layout: Layout,
}

/// Tape handles for the three embedding tables.
#[derive(Debug, Clone, Copy)]
struct StateVars {
    h_p: Var,
    h_l: Var,
    h_n: Var,
}

/// Sidecar written next to a checkpoint.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelManifest {
    pub variant: Variant,
    pub config: ModelConfig,
    pub scaling: FeatureScaling,
    pub kpi: String,
    pub config_hash: String,
    pub target_mean: f64,
    pub target_std: f64,
    pub num_params: usize,
}

impl ModelManifest {
    pub fn path_for(checkpoint: &Path) -> PathBuf {
        checkpoint.with_extension("json")
    }
}

fn round_params(
    store: &mut ParamStore,
    cfg: &ModelConfig,
    name: &str,
    rng: &mut seed::Rng,
) -> Result<RoundParams> {
    let nodes = cfg.variant.uses_nodes();
    let node_in = if nodes { cfg.node_dim } else { 0 };
    let gru = GruParams::new(store, &format!("{name}.path_rnn"), cfg.link_dim + node_in, cfg.path_dim, rng)?;
    let link_mlp = Mlp::new(
        store,
        &format!("{name}.link_mlp"),
        cfg.link_dim + node_in + cfg.path_dim,
        &cfg.link_mlp_hidden,
        cfg.link_dim,
        Activation::Relu,
        rng,
    )?;
    let gcn = if nodes {
        Some(GcnParams::new(store, &format!("{name}.node_gcn"), cfg.node_dim + cfg.link_dim, cfg.node_dim, rng)?)
    } else {
        None
    };
    Ok(RoundParams { gru, link_mlp, gcn })
}

fn build_layout(store: &mut ParamStore, cfg: &ModelConfig, rng: &mut seed::Rng) -> Result<Layout> {
    if cfg.variant == Variant::GenericGnn {
        let c0 = GcnParams::new(store, "conv0", 2 * cfg.gnn_paths, cfg.node_dim, rng)?;
        let c1 = GcnParams::new(store, "conv1", cfg.node_dim, cfg.node_dim, rng)?;
        let readout =
            Mlp::new(store, "readout", cfg.node_dim, &cfg.readout_hidden, cfg.gnn_paths, Activation::Identity, rng)?;
        return Ok(Layout::Generic { convs: [c0, c1], readout });
    }
    let rounds = if cfg.share_weights_across_iterations {
        let shared = round_params(store, cfg, "shared", rng)?;
        vec![shared; cfg.iterations]
    } else {
        (0..cfg.iterations)
            .map(|t| round_params(store, cfg, &format!("round{t}"), rng))
            .collect::<Result<_>>()?
    };
    let readout = Mlp::new(store, "readout", cfg.path_dim, &cfg.readout_hidden, 1, Activation::Identity, rng)?;
    Ok(Layout::MessagePassing { rounds, readout })
}

impl PlanModel {
    /// Fresh model with seeded uniform-scaled weights and zero biases.
    pub fn new(config: ModelConfig, scaling: FeatureScaling, seed: u64) -> Result<Self> {
        config.validate()?;
        scaling.validate()?;
        let mut rng = seed::rng(seed::derive_seed(seed, "init"));
        let mut store = ParamStore::new();
        let layout = build_layout(&mut store, &config, &mut rng)?;
        Ok(Self { config, scaling, store, layout })
    }

    /// Same structure with the given weights; names and shapes must match.
    pub fn with_store(&self, store: ParamStore) -> Result<Self> {
        let fits = store.len() == self.store.len()
            && self.store.ids().all(|id| {
                store.name(id) == self.store.name(id) && store.value(id).shape() == self.store.value(id).shape()
            });
        if !fits {
            return Err(PlanError::InvalidArgument("parameters do not match the model layout".into()));
        }
        Ok(Self { store, ..self.clone() })
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn scaling(&self) -> &FeatureScaling {
        &self.scaling
    }

    pub fn store(&self) -> &ParamStore {
        &self.store
    }

    pub fn store_mut(&mut self) -> &mut ParamStore {
        &mut self.store
    }

    pub fn num_params(&self) -> usize {
        self.store.num_scalars()
    }

    pub fn batch(&self, scenarios: &[&Scenario]) -> Result<Batch> {
        Batch::new(scenarios, &self.config, &self.scaling)
    }

    fn rounds(&self) -> Result<&[RoundParams]> {
        match &self.layout {
            Layout::MessagePassing { rounds, .. } => Ok(rounds),
            Layout::Generic { .. } => {
                Err(PlanError::InvalidArgument("the generic graph model has no update rounds".into()))
            }
        }
    }

    fn round(&self, t: usize) -> Result<&RoundParams> {
        let rounds = self.rounds()?;
        rounds.get(t).ok_or_else(|| {
            PlanError::InvalidArgument(format!("round {t} of a {}-round model", rounds.len()))
        })
    }

    fn load_state(tape: &mut Tape, state: &EmbeddingState) -> StateVars {
        StateVars {
            h_p: tape.constant(state.h_p.clone()),
            h_l: tape.constant(state.h_l.clone()),
            h_n: tape.constant(state.h_n.clone()),
        }
    }

    /// Recurrent pass along every path. Returns the new path states and,
    /// per link position, the messages of the paths active there.
    fn path_round(&self, tape: &mut Tape, batch: &Batch, p: &RoundParams, s: StateVars) -> Result<(Var, Vec<Var>)> {
        let store = &self.store;
        let mut h = s.h_p;
        let mut messages = Vec::with_capacity(batch.steps.len());
        for step in &batch.steps {
            let prev = match &step.active {
                Some(rows) => tape.gather(h, rows.clone())?,
                None => h,
            };
            let links = tape.gather(s.h_l, step.links.clone())?;
            let x = if self.config.variant.uses_nodes() {
                let nodes = tape.gather(s.h_n, step.srcs.clone())?;
                tape.concat(&[links, nodes])?
            } else {
                links
            };
            let next = crate::autodiff::gru_cell(tape, store, &p.gru, prev, x)?;
            h = match &step.active {
                Some(rows) => tape.set_rows(h, next, rows.clone())?,
                None => next,
            };
            messages.push(next);
        }
        Ok((h, messages))
    }

    fn link_round(&self, tape: &mut Tape, batch: &Batch, p: &RoundParams, s: StateVars, messages: &[Var]) -> Result<Var> {
        let links = tape.value(s.h_l).rows();
        let mut agg = tape.constant(Tensor::zeros(vec![links, self.config.path_dim]));
        for (step, &m) in batch.steps.iter().zip(messages) {
            let part = tape.spmm(m, step.to_links.clone())?;
            agg = tape.add(agg, part)?;
        }
        let input = if self.config.variant.uses_nodes() {
            let src = tape.gather(s.h_n, batch.link_src.clone())?;
            tape.concat(&[s.h_l, src, agg])?
        } else {
            tape.concat(&[s.h_l, agg])?
        };
        Ok(p.link_mlp.forward(tape, &self.store, input)?)
    }

    fn node_round(&self, tape: &mut Tape, batch: &Batch, p: &RoundParams, s: StateVars) -> Result<Var> {
        let gcn = p.gcn.as_ref().ok_or_else(|| PlanError::InvalidArgument("variant has no node update".into()))?;
        let out = tape.spmm(s.h_l, batch.out_links.clone())?;
        let z = tape.concat(&[s.h_n, out])?;
        Ok(weighted_graph_conv(tape, &self.store, gcn, z, &batch.graph, Activation::Relu)?)
    }

    /// Records the whole forward pass. The output has one row per path of
    /// the batch (message-passing variants) or one row of width `gnn_paths`
    /// per scenario (generic model); flattened, both list paths in batch order.
    pub fn forward_tape(&self, tape: &mut Tape, batch: &Batch) -> Result<Var> {
        match &self.layout {
            Layout::Generic { convs, readout } => {
                let inputs = batch.gnn.as_ref().ok_or_else(|| {
                    PlanError::InvalidArgument("batch was not built for the generic graph model".into())
                })?;
                let z = tape.constant(inputs.features.clone());
                let z = weighted_graph_conv(tape, &self.store, &convs[0], z, &batch.graph, Activation::Relu)?;
                let z = weighted_graph_conv(tape, &self.store, &convs[1], z, &batch.graph, Activation::Relu)?;
                let pooled = tape.spmm(z, inputs.pool.clone())?;
                Ok(readout.forward(tape, &self.store, pooled)?)
            }
            Layout::MessagePassing { rounds, readout } => {
                let mut s = Self::load_state(tape, &batch.init);
                for p in rounds {
                    let (h_p, messages) = self.path_round(tape, batch, p, s)?;
                    let h_l = self.link_round(tape, batch, p, s, &messages)?;
                    let h_n = if self.config.variant.uses_nodes() {
                        self.node_round(tape, batch, p, s)?
                    } else {
                        s.h_n
                    };
                    s = StateVars { h_p, h_l, h_n };
                }
                Ok(readout.forward(tape, &self.store, s.h_p)?)
            }
        }
    }

    /// Predictions for each scenario, one value per path.
    pub fn predict(&self, scenarios: &[&Scenario]) -> Result<Vec<Vec<f64>>> {
        let batch = self.batch(scenarios)?;
        let mut tape = Tape::new();
        let y = self.forward_tape(&mut tape, &batch)?;
        Ok(batch.split(tape.value(y).data()))
    }

    pub fn forward(&self, scenario: &Scenario) -> Result<Vec<f64>> {
        Ok(self.predict(&[scenario])?.remove(0))
    }

    fn single(&self, state: &EmbeddingState, scenario: &Scenario) -> Result<Batch> {
        self.batch(&[scenario])?.with_state(state)
    }

    /// Path step of round `t` applied to `state`; fills `messages`.
    pub fn update_paths(&self, state: &EmbeddingState, scenario: &Scenario, t: usize) -> Result<EmbeddingState> {
        let p = self.round(t)?;
        let batch = self.single(state, scenario)?;
        let mut tape = Tape::new();
        let s = Self::load_state(&mut tape, state);
        let (h_p, messages) = self.path_round(&mut tape, &batch, p, s)?;
        let mut per_path: Vec<Vec<f64>> = vec![Vec::new(); batch.path_count()];
        for (step, &m) in batch.steps.iter().zip(&messages) {
            let value = tape.value(m);
            for i in 0..value.rows() {
                let row = step.active.as_ref().map_or(i, |a| a[i]);
                per_path[row].extend_from_slice(value.row(i));
            }
        }
        let dim = self.config.path_dim;
        let messages = per_path
            .into_iter()
            .map(|d| Tensor::matrix(d.len() / dim, dim, d))
            .collect::<std::result::Result<_, _>>()?;
        Ok(EmbeddingState { h_p: tape.value(h_p).clone(), messages, ..state.clone() })
    }

    /// Link step of round `t`; needs the messages of a preceding path step.
    pub fn update_links(&self, state: &EmbeddingState, scenario: &Scenario, t: usize) -> Result<EmbeddingState> {
        let p = self.round(t)?;
        let batch = self.single(state, scenario)?;
        let lengths_match = state.messages.len() == scenario.paths.len()
            && state.messages.iter().zip(&scenario.paths).all(|(m, path)| m.rows() == path.links.len());
        if !lengths_match {
            return Err(PlanError::InvalidArgument("messages do not match the paths".into()));
        }
        let mut tape = Tape::new();
        let s = Self::load_state(&mut tape, state);
        let mut messages = Vec::with_capacity(batch.steps.len());
        for (k, step) in batch.steps.iter().enumerate() {
            let rows: Vec<usize> = match &step.active {
                Some(a) => a.as_ref().clone(),
                None => (0..batch.path_count()).collect(),
            };
            let data = rows.iter().flat_map(|&r| state.messages[r].row(k).to_vec()).collect();
            messages.push(tape.constant(Tensor::matrix(rows.len(), self.config.path_dim, data)?));
        }
        let h_l = self.link_round(&mut tape, &batch, p, s, &messages)?;
        Ok(EmbeddingState { h_l: tape.value(h_l).clone(), ..state.clone() })
    }

    /// Node step of round `t` (plan_net only).
    pub fn update_nodes(&self, state: &EmbeddingState, scenario: &Scenario, t: usize) -> Result<EmbeddingState> {
        let p = self.round(t)?;
        let batch = self.single(state, scenario)?;
        let mut tape = Tape::new();
        let s = Self::load_state(&mut tape, state);
        let h_n = self.node_round(&mut tape, &batch, p, s)?;
        Ok(EmbeddingState { h_n: tape.value(h_n).clone(), ..state.clone() })
    }

    /// Readout applied to path states.
    pub fn readout(&self, h_p: &Tensor) -> Result<Vec<f64>> {
        let Layout::MessagePassing { readout, .. } = &self.layout else {
            return Err(PlanError::InvalidArgument("the generic graph model reads out pooled nodes".into()));
        };
        let mut tape = Tape::new();
        let x = tape.constant(h_p.clone());
        let y = readout.forward(&mut tape, &self.store, x)?;
        Ok(tape.value(y).data().to_vec())
    }

    /// Writes the checkpoint and its JSON manifest next to it.
    pub fn save(&self, checkpoint: &Path, manifest: &ModelManifest) -> Result<()> {
        let io = |e: std::io::Error| PlanError::Io(format!("{}: {e}", checkpoint.display()));
        let mut buf = Vec::new();
        write_checkpoint(&self.store, &mut buf)?;
        fs::write(checkpoint, buf).map_err(io)?;
        let json = serde_json::to_string_pretty(manifest).map_err(|e| PlanError::Io(e.to_string()))?;
        fs::write(ModelManifest::path_for(checkpoint), json).map_err(io)?;
        Ok(())
    }

    pub fn load(checkpoint: &Path) -> Result<(Self, ModelManifest)> {
        let io = |e: std::io::Error| PlanError::Io(format!("{}: {e}", checkpoint.display()));
        let text = fs::read_to_string(ModelManifest::path_for(checkpoint)).map_err(io)?;
        let manifest: ModelManifest = serde_json::from_str(&text).map_err(|e| PlanError::Io(e.to_string()))?;
        let bytes = fs::read(checkpoint).map_err(io)?;
        let store = read_checkpoint(&mut bytes.as_slice())?;
        let skeleton = Self::new(manifest.config.clone(), manifest.scaling, 0)?;
        Ok((skeleton.with_store(store)?, manifest))
    }
}
