use super::{FeatureScaling, ModelConfig};
use crate::autodiff::Tensor;
use crate::netmodel::Scenario;

/// Plain-tensor snapshot of all embeddings between rounds.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingState {
    pub h_p: Tensor,
    pub h_l: Tensor,
    pub h_n: Tensor,
    /// Per path, one row per link of the path: the recurrent state right
    /// after reading that link. Empty before the first path update.
    pub messages: Vec<Tensor>,
}

fn padded(rows: usize, dim: usize, lead: impl Fn(usize) -> Vec<f64>) -> Tensor {
    let mut data = vec![0.0; rows * dim];
    for r in 0..rows {
        for (i, v) in lead(r).into_iter().enumerate().take(dim) {
            data[r * dim + i] = v;
        }
    }
    Tensor::matrix(rows, dim, data).expect("sized above")
}

/// Initial states: `[τ_on, τ_off, 0, ..]` per path, `[c_l, 0, ..]` per link,
/// `[out-degree, 0, ..]` per node, each divided by its scale.
pub fn init_embeddings(scenario: &Scenario, config: &ModelConfig, scaling: &FeatureScaling) -> EmbeddingState {
    let g = &scenario.graph;
    let rows = &scenario.traffic.rows;
    EmbeddingState {
        h_p: padded(rows.len(), config.path_dim, |p| {
            vec![rows[p].tau_on / scaling.tau, rows[p].tau_off / scaling.tau]
        }),
        h_l: padded(g.link_count(), config.link_dim, |l| {
            vec![g.link(l).capacity_kbps / scaling.capacity_kbps]
        }),
        h_n: padded(g.node_count(), config.node_dim, |n| vec![g.out_degree(n) as f64 / scaling.degree]),
        messages: Vec::new(),
    }
}

/// Unscaled `[N, 2P]` node features: columns `2k, 2k+1` hold path `k`'s
/// `(τ_on, τ_off)` on every node the path visits, zero elsewhere.
pub fn build_gnn_features(scenario: &Scenario) -> Tensor {
    let g = &scenario.graph;
    let cols = 2 * scenario.paths.len();
    let mut data = vec![0.0; g.node_count() * cols];
    for (k, (path, t)) in scenario.paths.iter().zip(&scenario.traffic.rows).enumerate() {
        for n in path.nodes(g) {
            data[n * cols + 2 * k] = t.tau_on;
            data[n * cols + 2 * k + 1] = t.tau_off;
        }
    }
    Tensor::matrix(g.node_count(), cols, data).expect("sized above")
}
