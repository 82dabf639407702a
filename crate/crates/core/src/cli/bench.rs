//! Wall-clock comparison of one model forward pass against one simulation.

use std::time::Instant;

use serde::Serialize;

use crate::netmodel::Scenario;
use crate::simcore::{simulate, SimConfig};
use crate::trainer::FoldModel;

pub const MIN_REPS: usize = 3;

#[derive(Debug, Clone, Serialize)]
pub struct BenchReport {
    pub reps: usize,
    pub nodes: usize,
    pub links: usize,
    pub paths: usize,
    pub forward_median_s: f64,
    pub sim_median_s: f64,
    /// Simulation time over forward time.
    pub ratio: f64,
    /// Drops summed over paths in the first simulation, a congestion witness.
    pub sim_drops: u64,
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        (v[n / 2 - 1] + v[n / 2]) / 2.0
    }
}

/// Times `reps` forward passes and `reps` simulations (with seeds
/// `sim.seed + r`) of the same scenario.
pub fn bench(model: &FoldModel, scenario: &Scenario, sim: &SimConfig, reps: usize) -> anyhow::Result<BenchReport> {
    anyhow::ensure!(reps >= MIN_REPS, "at least {MIN_REPS} repetitions are needed, got {reps}");
    // One untimed pass each so allocation warm-up is not measured.
    model.predict(&[scenario])?;
    let first = simulate(&scenario.graph, &scenario.paths, &scenario.traffic, sim)?;
    let sim_drops = first.iter().map(|k| k.drops).sum();

    let mut forward = Vec::with_capacity(reps);
    for _ in 0..reps {
        let t = Instant::now();
        std::hint::black_box(model.predict(&[scenario])?);
        forward.push(t.elapsed().as_secs_f64());
    }
    let mut sims = Vec::with_capacity(reps);
    for r in 0..reps as u64 {
        let cfg = sim.clone().with_seed(sim.seed.wrapping_add(r));
        let t = Instant::now();
        std::hint::black_box(simulate(&scenario.graph, &scenario.paths, &scenario.traffic, &cfg)?);
        sims.push(t.elapsed().as_secs_f64());
    }
    let forward_median_s = median(forward);
    let sim_median_s = median(sims);
    Ok(BenchReport {
        reps,
        nodes: scenario.graph.node_count(),
        links: scenario.graph.link_count(),
        paths: scenario.path_count(),
        forward_median_s,
        sim_median_s,
        ratio: sim_median_s / forward_median_s,
        sim_drops,
    })
}
