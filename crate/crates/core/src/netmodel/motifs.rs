//! Small hand-placed wireless layouts used to contrast topologies that share
//! the same link-path incidence but differ in node structure.

use super::{
    wireless_graph, NetError, NetworkGraph, OnOff, PathSpec, RadioConfig, Result, Scenario,
    TrafficMatrix, WIRELESS_CAPACITY_KBPS,
};

/// Transmit power of every motif; reach is about 51.7 m.
pub const MOTIF_PTX_DBM: f64 = 14.0;
/// Length of every flow hop.
pub const MOTIF_HOP_M: f64 = 35.0;

pub fn motif_radio() -> RadioConfig {
    RadioConfig::default().with_ptx(MOTIF_PTX_DBM)
}

/// Path along an explicit node sequence.
pub fn path_through(graph: &NetworkGraph, nodes: &[usize]) -> Result<PathSpec> {
    let links = nodes
        .windows(2)
        .map(|w| graph.link_id(w[0], w[1]).ok_or(NetError::NoPath { src: w[0], dst: w[1] }))
        .collect::<Result<Vec<_>>>()?;
    PathSpec::from_links(graph, links)
}

fn build(positions: &[[f64; 2]], routes: &[Vec<usize>], traffic: &[OnOff], rate_kbps: f64) -> Result<Scenario> {
    if routes.len() != traffic.len() {
        return Err(NetError::InvalidArgument(format!(
            "{} routes but {} traffic rows",
            routes.len(),
            traffic.len()
        )));
    }
    let graph = wireless_graph(positions, &motif_radio(), WIRELESS_CAPACITY_KBPS);
    let paths = routes.iter().map(|r| path_through(&graph, r)).collect::<Result<_>>()?;
    Scenario::new(graph, paths, TrafficMatrix::new(traffic.to_vec(), rate_kbps)?)
}

/// One single-hop flow per traffic row, each with its own transmitter.
/// `close` packs the pairs 30 m apart so extra links and interference
/// appear; otherwise the pairs are 200 m apart and fully independent.
pub fn parallel_motif(close: bool, traffic: &[OnOff], rate_kbps: f64) -> Result<Scenario> {
    let gap = if close { 30.0 } else { 200.0 };
    let mut positions = Vec::new();
    let mut routes = Vec::new();
    for i in 0..traffic.len() {
        let y = i as f64 * gap;
        positions.push([0.0, y]);
        positions.push([MOTIF_HOP_M, y]);
        routes.push(vec![2 * i, 2 * i + 1]);
    }
    build(&positions, &routes, traffic, rate_kbps)
}

/// One single-hop flow per traffic row, all sent by a shared centre node
/// (node 0) to leaves spread evenly on a circle. With `close` the leaves sit
/// at 25 m and, for three leaves, reach each other; otherwise at 35 m.
pub fn star_motif(close: bool, traffic: &[OnOff], rate_kbps: f64) -> Result<Scenario> {
    let r = if close { 25.0 } else { MOTIF_HOP_M };
    let n = traffic.len();
    let mut positions = vec![[0.0, 0.0]];
    let mut routes = Vec::new();
    for i in 0..n {
        let a = std::f64::consts::TAU * i as f64 / n as f64;
        positions.push([r * a.cos(), r * a.sin()]);
        routes.push(vec![0, i + 1]);
    }
    build(&positions, &routes, traffic, rate_kbps)
}

/// Two two-hop flows west→east and north→south, both relayed by the
/// centre node 0.
pub fn crossing_motif(traffic: [OnOff; 2], rate_kbps: f64) -> Result<Scenario> {
    let d = MOTIF_HOP_M;
    let positions = [[0.0, 0.0], [-d, 0.0], [d, 0.0], [0.0, d], [0.0, -d]];
    build(&positions, &[vec![1, 0, 2], vec![3, 0, 4]], &traffic, rate_kbps)
}

/// Two two-hop relay chains 300 m apart, out of each other's range.
pub fn disjoint_motif(traffic: [OnOff; 2], rate_kbps: f64) -> Result<Scenario> {
    let d = MOTIF_HOP_M;
    let positions = [[-d, 0.0], [0.0, 0.0], [d, 0.0], [-d, 300.0], [0.0, 300.0], [d, 300.0]];
    build(&positions, &[vec![0, 1, 2], vec![3, 4, 5]], &traffic, rate_kbps)
}
