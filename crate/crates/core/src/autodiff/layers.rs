use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::tape::{SparseMap, Tape, Var};
use super::{AdError, ParamId, ParamStore, Result};
use crate::netmodel::NetworkGraph;
use crate::seed;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Identity,
    Relu,
}

impl Activation {
    fn apply(self, tape: &mut Tape, x: Var) -> Var {
        match self {
            Activation::Identity => x,
            Activation::Relu => tape.relu(x),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DenseParams {
    pub weight: ParamId,
    pub bias: ParamId,
    pub n_in: usize,
    pub n_out: usize,
}

impl DenseParams {
    pub fn new(
        store: &mut ParamStore,
        name: &str,
        n_in: usize,
        n_out: usize,
        rng: &mut seed::Rng,
    ) -> Result<Self> {
        let weight = store.add_glorot(format!("{name}.w"), n_in, n_out, rng)?;
        let bias = store.add_zeros(format!("{name}.b"), n_out)?;
        Ok(Self { weight, bias, n_in, n_out })
    }

    pub fn num_scalars(&self) -> usize {
        self.n_in * self.n_out + self.n_out
    }
}

/// `act(x · W + b)` for every row of `x`.
pub fn dense(
    tape: &mut Tape,
    store: &ParamStore,
    p: &DenseParams,
    x: Var,
    act: Activation,
) -> Result<Var> {
    let cols = tape.value(x).dims().1;
    if cols != p.n_in {
        return Err(AdError::InvalidArgument(format!(
            "dense layer expects {} inputs, got {cols}",
            p.n_in
        )));
    }
    let w = tape.param(store, p.weight);
    let b = tape.param(store, p.bias);
    let y = tape.matmul(x, w)?;
    let y = tape.add_bias(y, b)?;
    Ok(act.apply(tape, y))
}

/// Stack of dense layers: ReLU on hidden layers, `output` on the last.
#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    pub layers: Vec<DenseParams>,
    pub output: Activation,
}

impl Mlp {
    pub fn new(
        store: &mut ParamStore,
        name: &str,
        n_in: usize,
        hidden: &[usize],
        n_out: usize,
        output: Activation,
        rng: &mut seed::Rng,
    ) -> Result<Self> {
        let mut layers = Vec::with_capacity(hidden.len() + 1);
        let mut fan_in = n_in;
        for (i, &h) in hidden.iter().chain(std::iter::once(&n_out)).enumerate() {
            layers.push(DenseParams::new(store, &format!("{name}.{i}"), fan_in, h, rng)?);
            fan_in = h;
        }
        Ok(Self { layers, output })
    }

    pub fn forward(&self, tape: &mut Tape, store: &ParamStore, x: Var) -> Result<Var> {
        let last = self.layers.len() - 1;
        let mut h = x;
        for (i, layer) in self.layers.iter().enumerate() {
            let act = if i == last { self.output } else { Activation::Relu };
            h = dense(tape, store, layer, h, act)?;
        }
        Ok(h)
    }

    pub fn num_scalars(&self) -> usize {
        self.layers.iter().map(DenseParams::num_scalars).sum()
    }
}

/// Gated recurrent cell weights. Gates: update `z`, reset `r`, candidate `c`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GruParams {
    pub input: usize,
    pub hidden: usize,
    pub w: [ParamId; 3],
    pub u: [ParamId; 3],
    pub b: [ParamId; 3],
}

impl GruParams {
    pub fn new(
        store: &mut ParamStore,
        name: &str,
        input: usize,
        hidden: usize,
        rng: &mut seed::Rng,
    ) -> Result<Self> {
        let mut w = [ParamId(0); 3];
        let mut u = [ParamId(0); 3];
        let mut b = [ParamId(0); 3];
        for (g, gate) in ["z", "r", "c"].iter().enumerate() {
            w[g] = store.add_glorot(format!("{name}.w{gate}"), input, hidden, rng)?;
            u[g] = store.add_glorot(format!("{name}.u{gate}"), hidden, hidden, rng)?;
            b[g] = store.add_zeros(format!("{name}.b{gate}"), hidden)?;
        }
        Ok(Self { input, hidden, w, u, b })
    }

    pub fn num_scalars(&self) -> usize {
        3 * (self.input * self.hidden + self.hidden * self.hidden + self.hidden)
    }
}

/// One step for a batch of rows:
/// `z = σ(xWz + hUz + bz)`, `r = σ(xWr + hUr + br)`,
/// `c = tanh(xWc + (r ⊙ h)Uc + bc)`, `h' = z ⊙ h + (1 - z) ⊙ c`.
pub fn gru_cell(tape: &mut Tape, store: &ParamStore, p: &GruParams, h: Var, x: Var) -> Result<Var> {
    let (hr, hc) = tape.value(h).dims();
    let (xr, xc) = tape.value(x).dims();
    if hc != p.hidden || xc != p.input || hr != xr {
        return Err(AdError::InvalidArgument(format!(
            "GRU({}, {}) applied to state {hr}x{hc} and input {xr}x{xc}",
            p.input, p.hidden
        )));
    }
    let gate = |tape: &mut Tape, g: usize, state: Var| -> Result<Var> {
        let w = tape.param(store, p.w[g]);
        let u = tape.param(store, p.u[g]);
        let b = tape.param(store, p.b[g]);
        let a = tape.matmul(x, w)?;
        let s = tape.matmul(state, u)?;
        let sum = tape.add(a, s)?;
        tape.add_bias(sum, b)
    };
    let z = gate(tape, 0, h)?;
    let z = tape.sigmoid(z);
    let r = gate(tape, 1, h)?;
    let r = tape.sigmoid(r);
    let rh = tape.mul(r, h)?;
    let c = gate(tape, 2, rh)?;
    let c = tape.tanh(c);
    let keep = tape.mul(z, h)?;
    let nz = tape.one_minus(z);
    let fresh = tape.mul(nz, c)?;
    tape.add(keep, fresh)
}

/// Symmetric weighted-degree normalised adjacency: row `n` collects
/// `e_mn / sqrt(deg_w(m) deg_w(n)) · z_m` over links `(m, n)`.
#[derive(Debug, Clone, PartialEq)]
pub struct GraphOperator {
    map: Arc<SparseMap>,
}

impl GraphOperator {
    /// `links` holds `(src, dst, weight)`. Degrees are out-link weight sums;
    /// a node without outgoing links uses its incoming sum instead.
    pub fn from_links(nodes: usize, links: &[(usize, usize, f64)]) -> Result<Self> {
        let mut deg = vec![0.0; nodes];
        let mut in_deg = vec![0.0; nodes];
        for &(s, d, w) in links {
            if s >= nodes || d >= nodes {
                return Err(AdError::InvalidArgument(format!("link ({s}, {d}) outside {nodes} nodes")));
            }
            deg[s] += w;
            in_deg[d] += w;
        }
        for (d, i) in deg.iter_mut().zip(in_deg) {
            if *d == 0.0 {
                *d = i;
            }
        }
        let entries = links
            .iter()
            .filter(|&&(s, d, _)| deg[s] > 0.0 && deg[d] > 0.0)
            .map(|&(s, d, w)| (d, s, w / (deg[s] * deg[d]).sqrt()))
            .collect();
        Ok(Self { map: Arc::new(SparseMap::new(nodes, nodes, entries)?) })
    }

    pub fn from_graph(graph: &NetworkGraph) -> Self {
        let links: Vec<_> = graph.links().iter().map(|l| (l.src, l.dst, l.weight)).collect();
        Self::from_links(graph.node_count(), &links).expect("graph links reference valid nodes")
    }

    /// Block-diagonal union; block `i` is offset by the node counts before it.
    pub fn disjoint_union(parts: &[&GraphOperator]) -> Self {
        let mut entries = Vec::new();
        let mut offset = 0;
        for p in parts {
            entries.extend(p.map.entries.iter().map(|&(d, s, w)| (d + offset, s + offset, w)));
            offset += p.map.out_rows;
        }
        Self { map: Arc::new(SparseMap { out_rows: offset, in_rows: offset, entries }) }
    }

    pub fn nodes(&self) -> usize {
        self.map.out_rows
    }

    pub fn map(&self) -> &Arc<SparseMap> {
        &self.map
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GcnParams {
    pub theta_self: ParamId,
    pub theta_nb: ParamId,
    pub f_in: usize,
    pub f_out: usize,
}

impl GcnParams {
    pub fn new(
        store: &mut ParamStore,
        name: &str,
        f_in: usize,
        f_out: usize,
        rng: &mut seed::Rng,
    ) -> Result<Self> {
        let theta_self = store.add_glorot(format!("{name}.self"), f_in, f_out, rng)?;
        let theta_nb = store.add_glorot(format!("{name}.nb"), f_in, f_out, rng)?;
        Ok(Self { theta_self, theta_nb, f_in, f_out })
    }

    pub fn num_scalars(&self) -> usize {
        2 * self.f_in * self.f_out
    }
}

/// `act(Z Θ_self + Â Z Θ_nb)` with `Â` the normalised adjacency.
pub fn weighted_graph_conv(
    tape: &mut Tape,
    store: &ParamStore,
    p: &GcnParams,
    z: Var,
    graph: &GraphOperator,
    act: Activation,
) -> Result<Var> {
    let (rows, cols) = tape.value(z).dims();
    if rows != graph.nodes() || cols != p.f_in {
        return Err(AdError::InvalidArgument(format!(
            "graph conv over {} nodes with {} features got {rows}x{cols}",
            graph.nodes(),
            p.f_in
        )));
    }
    let ts = tape.param(store, p.theta_self);
    let tn = tape.param(store, p.theta_nb);
    let own = tape.matmul(z, ts)?;
    let agg = tape.spmm(z, graph.map().clone())?;
    let nb = tape.matmul(agg, tn)?;
    let sum = tape.add(own, nb)?;
    Ok(act.apply(tape, sum))
}

/// Masked mean squared error plus `lambda · Σ‖θ‖²` over every parameter.
pub fn mse_l2_loss(
    tape: &mut Tape,
    store: &ParamStore,
    pred: Var,
    target: &[f64],
    mask: &[bool],
    lambda: f64,
) -> Result<Var> {
    if !(lambda >= 0.0) {
        return Err(AdError::InvalidArgument(format!("negative L2 weight {lambda}")));
    }
    let mse = tape.masked_mse(pred, target, mask)?;
    if lambda == 0.0 {
        return Ok(mse);
    }
    let params: Vec<Var> = store.ids().map(|id| tape.param(store, id)).collect();
    let reg = tape.sum_squares(&params);
    let reg = tape.scale(reg, lambda);
    tape.add(mse, reg)
}
