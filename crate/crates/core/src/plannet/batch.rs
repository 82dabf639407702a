use std::sync::Arc;

use super::features::{build_gnn_features, init_embeddings, EmbeddingState};
use super::{FeatureScaling, ModelConfig, PlanError, Result, Variant};
use crate::autodiff::{GraphOperator, SparseMap, Tensor};
use crate::netmodel::Scenario;

/// Link position `k` of every path long enough to have one.
#[derive(Debug, Clone)]
pub(crate) struct PathStep {
    /// Path rows taking part; `None` when every path does, in order.
    pub active: Option<Arc<Vec<usize>>>,
    pub links: Arc<Vec<usize>>,
    pub srcs: Arc<Vec<usize>>,
    /// Sums this step's messages into per-link rows.
    pub to_links: Arc<SparseMap>,
}

#[derive(Debug, Clone)]
pub(crate) struct GnnInputs {
    pub features: Tensor,
    pub pool: Arc<SparseMap>,
}

/// Disjoint union of scenarios with all index structures a forward pass needs.
#[derive(Debug, Clone)]
pub struct Batch {
    pub(crate) path_counts: Vec<usize>,
    pub(crate) init: EmbeddingState,
    pub(crate) steps: Vec<PathStep>,
    pub(crate) link_src: Arc<Vec<usize>>,
    pub(crate) out_links: Arc<SparseMap>,
    pub(crate) graph: GraphOperator,
    pub(crate) gnn: Option<GnnInputs>,
}

fn stack(parts: Vec<Tensor>, cols: usize) -> Tensor {
    let rows = parts.iter().map(|t| t.rows()).sum();
    let data = parts.into_iter().flat_map(Tensor::into_data).collect();
    Tensor::matrix(rows, cols, data).expect("parts share a width")
}

impl Batch {
    pub fn new(scenarios: &[&Scenario], config: &ModelConfig, scaling: &FeatureScaling) -> Result<Self> {
        config.validate()?;
        scaling.validate()?;
        let mut path_counts = Vec::with_capacity(scenarios.len());
        let mut paths: Vec<Vec<usize>> = Vec::new();
        let mut link_src = Vec::new();
        let mut out_entries = Vec::new();
        let mut graph_parts = Vec::with_capacity(scenarios.len());
        let (mut hp, mut hl, mut hn) = (Vec::new(), Vec::new(), Vec::new());
        let mut gnn_rows = Vec::new();
        let mut pool = Vec::new();
        let (mut node_off, mut link_off) = (0, 0);
        for (s, sc) in scenarios.iter().enumerate() {
            sc.validate()?;
            let g = &sc.graph;
            if config.variant == Variant::GenericGnn && sc.path_count() != config.gnn_paths {
                return Err(PlanError::OutputWidth { expected: config.gnn_paths, got: sc.path_count() });
            }
            path_counts.push(sc.path_count());
            paths.extend(sc.paths.iter().map(|p| p.links.iter().map(|&l| l + link_off).collect()));
            for (l, link) in g.links().iter().enumerate() {
                link_src.push(link.src + node_off);
                out_entries.push((link.src + node_off, l + link_off, 1.0));
            }
            graph_parts.push(GraphOperator::from_graph(g));
            let st = init_embeddings(sc, config, scaling);
            hp.push(st.h_p);
            hl.push(st.h_l);
            hn.push(st.h_n);
            if config.variant == Variant::GenericGnn {
                let f = build_gnn_features(sc);
                let scaled: Vec<f64> = f.data().iter().map(|x| x / scaling.tau).collect();
                gnn_rows.push(Tensor::matrix(f.rows(), f.cols(), scaled)?);
                let w = 1.0 / g.node_count() as f64;
                pool.extend((0..g.node_count()).map(|n| (s, n + node_off, w)));
            }
            node_off += g.node_count();
            link_off += g.link_count();
        }
        let total_paths = paths.len();
        let max_len = paths.iter().map(Vec::len).max().unwrap_or(0);
        let mut steps = Vec::with_capacity(max_len);
        for k in 0..max_len {
            let active: Vec<usize> = (0..total_paths).filter(|&p| paths[p].len() > k).collect();
            let links: Vec<usize> = active.iter().map(|&p| paths[p][k]).collect();
            let srcs = links.iter().map(|&l| link_src[l]).collect();
            let to_links = SparseMap::scatter_sum(link_off, &links)?;
            steps.push(PathStep {
                active: (active.len() < total_paths).then(|| Arc::new(active)),
                links: Arc::new(links),
                srcs: Arc::new(srcs),
                to_links: Arc::new(to_links),
            });
        }
        let gnn = if config.variant == Variant::GenericGnn {
            Some(GnnInputs {
                features: stack(gnn_rows, 2 * config.gnn_paths),
                pool: Arc::new(SparseMap::new(scenarios.len(), node_off, pool)?),
            })
        } else {
            None
        };
        let refs: Vec<&GraphOperator> = graph_parts.iter().collect();
        Ok(Self {
            path_counts,
            init: EmbeddingState {
                h_p: stack(hp, config.path_dim),
                h_l: stack(hl, config.link_dim),
                h_n: stack(hn, config.node_dim),
                messages: Vec::new(),
            },
            steps,
            link_src: Arc::new(link_src),
            out_links: Arc::new(SparseMap::new(node_off, link_off, out_entries)?),
            graph: GraphOperator::disjoint_union(&refs),
            gnn,
        })
    }

    /// Replaces the initial embeddings, e.g. to run a single update step.
    pub fn with_state(mut self, state: &EmbeddingState) -> Result<Self> {
        let same = |a: &Tensor, b: &Tensor| a.dims() == b.dims();
        if !same(&state.h_p, &self.init.h_p) || !same(&state.h_l, &self.init.h_l) || !same(&state.h_n, &self.init.h_n) {
            return Err(PlanError::InvalidArgument("embedding state does not fit the batch".into()));
        }
        self.init = EmbeddingState { messages: Vec::new(), ..state.clone() };
        Ok(self)
    }

    pub fn scenario_count(&self) -> usize {
        self.path_counts.len()
    }

    pub fn path_count(&self) -> usize {
        self.path_counts.iter().sum()
    }

    pub fn path_counts(&self) -> &[usize] {
        &self.path_counts
    }

    pub fn initial_state(&self) -> &EmbeddingState {
        &self.init
    }

    /// Splits batch-wide per-path values back into per-scenario vectors.
    pub fn split(&self, values: &[f64]) -> Vec<Vec<f64>> {
        let mut out = Vec::with_capacity(self.path_counts.len());
        let mut at = 0;
        for &n in &self.path_counts {
            out.push(values[at..at + n].to_vec());
            at += n;
        }
        out
    }
}
