use std::f64::consts::PI;

use rand::Rng;

use super::radio::max_link_distance;
use super::{Link, NetError, NetworkGraph, Node, RadioConfig, Result};
use crate::seed;

pub const WIRED_CAPACITY_KBPS: f64 = 1000.0;
/// 802.11a base rate.
pub const WIRELESS_CAPACITY_KBPS: f64 = 6000.0;
/// Upper bound on `edge_weight`; reached for `d <= e^0.1 - 1`.
pub const WEIGHT_CAP: f64 = 10.0;

/// The 21 bidirectional NSFNet trunks.
pub const NSFNET_EDGES: [(usize, usize); 21] = [
    (0, 1),
    (0, 2),
    (0, 3),
    (1, 2),
    (1, 7),
    (2, 5),
    (3, 4),
    (3, 8),
    (4, 5),
    (4, 6),
    (5, 12),
    (5, 13),
    (6, 7),
    (7, 10),
    (8, 9),
    (8, 11),
    (9, 10),
    (9, 12),
    (10, 11),
    (10, 13),
    (11, 12),
];

// Rough continental layout in meters; positions are informational only for
// wired graphs.
const NSFNET_POSITIONS: [[f64; 2]; 14] = [
    [0.0, 1_800_000.0],
    [200_000.0, 1_000_000.0],
    [400_000.0, 400_000.0],
    [900_000.0, 1_300_000.0],
    [1_400_000.0, 1_100_000.0],
    [1_900_000.0, 300_000.0],
    [2_000_000.0, 1_200_000.0],
    [2_600_000.0, 1_300_000.0],
    [3_200_000.0, 1_200_000.0],
    [3_100_000.0, 500_000.0],
    [3_000_000.0, 1_600_000.0],
    [3_700_000.0, 1_700_000.0],
    [3_900_000.0, 1_300_000.0],
    [3_700_000.0, 900_000.0],
];

/// Link strength as a function of distance: `1 / ln(1 + d)`, capped at
/// [`WEIGHT_CAP`].
pub fn edge_weight(d: f64) -> Result<f64> {
    if !(d > 0.0) || !d.is_finite() {
        return Err(NetError::InvalidArgument(format!("edge distance must be positive, got {d}")));
    }
    Ok((1.0 / d.ln_1p()).min(WEIGHT_CAP))
}

pub fn gen_nsfnet() -> NetworkGraph {
    gen_nsfnet_with_capacity(WIRED_CAPACITY_KBPS)
}

pub fn gen_nsfnet_with_capacity(capacity_kbps: f64) -> NetworkGraph {
    let nodes = NSFNET_POSITIONS.iter().enumerate().map(|(id, &pos)| Node { id, pos }).collect();
    let mut links = Vec::with_capacity(2 * NSFNET_EDGES.len());
    for &(a, b) in &NSFNET_EDGES {
        for (src, dst) in [(a, b), (b, a)] {
            links.push(Link { src, dst, capacity_kbps, weight: 1.0 });
        }
    }
    links.sort_by_key(|l| (l.src, l.dst));
    NetworkGraph::new(nodes, links).expect("NSFNet constants are well formed")
}

/// Symmetric radio graph over fixed positions: one directed link each way
/// between every pair within `max_link_distance(radio)`.
pub fn wireless_graph(positions: &[[f64; 2]], radio: &RadioConfig, capacity_kbps: f64) -> NetworkGraph {
    let reach = max_link_distance(radio);
    let nodes: Vec<Node> =
        positions.iter().enumerate().map(|(id, &pos)| Node { id, pos }).collect();
    let mut links = Vec::new();
    for i in 0..nodes.len() {
        for j in 0..nodes.len() {
            if i == j {
                continue;
            }
            let [xi, yi] = nodes[i].pos;
            let [xj, yj] = nodes[j].pos;
            let d = (xi - xj).hypot(yi - yj);
            if d <= reach {
                // Coincident nodes get the capped weight.
                let weight = edge_weight(d.max(f64::MIN_POSITIVE)).expect("distance is positive");
                links.push(Link { src: i, dst: j, capacity_kbps, weight });
            }
        }
    }
    NetworkGraph::new(nodes, links).expect("generated radio graph is well formed")
}

pub fn gen_grid(rows: usize, cols: usize, spacing: f64, radio: &RadioConfig) -> Result<NetworkGraph> {
    gen_grid_with_capacity(rows, cols, spacing, radio, WIRELESS_CAPACITY_KBPS)
}

/// Row-major lattice: node `r * cols + c` sits at `(c · spacing, r · spacing)`.
pub fn gen_grid_with_capacity(
    rows: usize,
    cols: usize,
    spacing: f64,
    radio: &RadioConfig,
    capacity_kbps: f64,
) -> Result<NetworkGraph> {
    if rows < 2 || cols < 2 {
        return Err(NetError::InvalidArgument(format!("grid must be at least 2x2, got {rows}x{cols}")));
    }
    if !(spacing > 0.0) || !spacing.is_finite() {
        return Err(NetError::InvalidArgument(format!("grid spacing must be positive, got {spacing}")));
    }
    if !(capacity_kbps > 0.0) {
        return Err(NetError::InvalidArgument(format!("capacity must be positive, got {capacity_kbps}")));
    }
    if !radio.gamma.is_finite() || radio.gamma <= 0.0 {
        return Err(NetError::InvalidArgument("path-loss exponent must be positive".into()));
    }
    let reach = max_link_distance(radio);
    if reach < spacing {
        return Err(NetError::EmptyGraph(format!(
            "radio reach {reach:.2} m is below the grid spacing {spacing} m"
        )));
    }
    let positions: Vec<[f64; 2]> = (0..rows)
        .flat_map(|r| (0..cols).map(move |c| [c as f64 * spacing, r as f64 * spacing]))
        .collect();
    Ok(wireless_graph(&positions, radio, capacity_kbps))
}

/// Moves every node to a uniform point of the disk of `radius` around its
/// current position and rebuilds the radio links.
pub fn perturb(graph: &NetworkGraph, radius: f64, radio: &RadioConfig, seed: u64) -> NetworkGraph {
    let radius = radius.max(0.0);
    let capacity = graph.links().first().map_or(WIRELESS_CAPACITY_KBPS, |l| l.capacity_kbps);
    let mut rng = seed::rng(seed);
    let positions: Vec<[f64; 2]> = graph
        .nodes()
        .iter()
        .map(|n| {
            let r = radius * rng.gen::<f64>().sqrt();
            let theta = 2.0 * PI * rng.gen::<f64>();
            if radius == 0.0 {
                n.pos
            } else {
                [n.pos[0] + r * theta.cos(), n.pos[1] + r * theta.sin()]
            }
        })
        .collect();
    wireless_graph(&positions, radio, capacity)
}
