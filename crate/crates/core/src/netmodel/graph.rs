use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::{NetError, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Node {
    pub id: usize,
    /// Position in meters.
    pub pos: [f64; 2],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Link {
    pub src: usize,
    pub dst: usize,
    pub capacity_kbps: f64,
    pub weight: f64,
}

#[derive(Serialize, Deserialize)]
struct RawGraph {
    nodes: Vec<Node>,
    links: Vec<Link>,
}

/// Directed network graph with node positions and per-link capacity and weight.
///
/// Construction validates the invariants (dense ids, no self-loops, no
/// duplicate links, positive finite weights and capacities), so every value
/// of this type is well formed.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(try_from = "RawGraph", into = "RawGraph")]
pub struct NetworkGraph {
    nodes: Vec<Node>,
    links: Vec<Link>,
    index: HashMap<(usize, usize), usize>,
    out_links: Vec<Vec<usize>>,
    in_links: Vec<Vec<usize>>,
}

impl PartialEq for NetworkGraph {
    fn eq(&self, other: &Self) -> bool {
        self.nodes == other.nodes && self.links == other.links
    }
}

impl TryFrom<RawGraph> for NetworkGraph {
    type Error = NetError;

    fn try_from(raw: RawGraph) -> Result<Self> {
        NetworkGraph::new(raw.nodes, raw.links)
    }
}

impl From<NetworkGraph> for RawGraph {
    fn from(g: NetworkGraph) -> Self {
        RawGraph { nodes: g.nodes, links: g.links }
    }
}

impl NetworkGraph {
    pub fn new(nodes: Vec<Node>, links: Vec<Link>) -> Result<Self> {
        for (i, n) in nodes.iter().enumerate() {
            if n.id != i {
                return Err(NetError::InvalidGraph(format!(
                    "node at index {i} has id {}; ids must be 0..n without gaps",
                    n.id
                )));
            }
            if !n.pos.iter().all(|c| c.is_finite()) {
                return Err(NetError::InvalidGraph(format!("node {i} has a non-finite position")));
            }
        }
        let n = nodes.len();
        let mut index = HashMap::with_capacity(links.len());
        let mut out_links = vec![Vec::new(); n];
        let mut in_links = vec![Vec::new(); n];
        for (id, l) in links.iter().enumerate() {
            if l.src >= n || l.dst >= n {
                return Err(NetError::InvalidGraph(format!(
                    "link {id} ({} -> {}) references a missing node",
                    l.src, l.dst
                )));
            }
            if l.src == l.dst {
                return Err(NetError::InvalidGraph(format!("link {id} is a self-loop on {}", l.src)));
            }
            if !(l.weight.is_finite() && l.weight > 0.0) {
                return Err(NetError::InvalidGraph(format!("link {id} has weight {}", l.weight)));
            }
            if !(l.capacity_kbps.is_finite() && l.capacity_kbps > 0.0) {
                return Err(NetError::InvalidGraph(format!(
                    "link {id} has capacity {}",
                    l.capacity_kbps
                )));
            }
            if index.insert((l.src, l.dst), id).is_some() {
                return Err(NetError::InvalidGraph(format!(
                    "duplicate link {} -> {}",
                    l.src, l.dst
                )));
            }
            out_links[l.src].push(id);
            in_links[l.dst].push(id);
        }
        Ok(Self { nodes, links, index, out_links, in_links })
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn links(&self) -> &[Link] {
        &self.links
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn link_count(&self) -> usize {
        self.links.len()
    }

    pub fn link(&self, id: usize) -> &Link {
        &self.links[id]
    }

    pub fn link_id(&self, src: usize, dst: usize) -> Option<usize> {
        self.index.get(&(src, dst)).copied()
    }

    /// Ids of links leaving `node`, in link-id order.
    pub fn out_links(&self, node: usize) -> &[usize] {
        &self.out_links[node]
    }

    /// Ids of links entering `node`, in link-id order.
    pub fn in_links(&self, node: usize) -> &[usize] {
        &self.in_links[node]
    }

    pub fn out_degree(&self, node: usize) -> usize {
        self.out_links[node].len()
    }

    /// Sum of the weights of links leaving `node`.
    pub fn weighted_degree(&self, node: usize) -> f64 {
        self.out_links[node].iter().map(|&l| self.links[l].weight).sum()
    }

    /// Neighbours reachable over one outgoing link, ascending by id.
    pub fn successors(&self, node: usize) -> Vec<usize> {
        let mut s: Vec<usize> = self.out_links[node].iter().map(|&l| self.links[l].dst).collect();
        s.sort_unstable();
        s
    }

    pub fn is_symmetric(&self) -> bool {
        self.links.iter().all(|l| self.index.contains_key(&(l.dst, l.src)))
    }

    pub fn distance(&self, a: usize, b: usize) -> f64 {
        let [ax, ay] = self.nodes[a].pos;
        let [bx, by] = self.nodes[b].pos;
        (ax - bx).hypot(ay - by)
    }

    /// True when every node can reach every other node.
    pub fn is_strongly_connected(&self) -> bool {
        let n = self.node_count();
        if n == 0 {
            return true;
        }
        let reach = |forward: bool| {
            let mut seen = vec![false; n];
            let mut stack = vec![0usize];
            seen[0] = true;
            while let Some(u) = stack.pop() {
                let edges = if forward { &self.out_links[u] } else { &self.in_links[u] };
                for &l in edges {
                    let v = if forward { self.links[l].dst } else { self.links[l].src };
                    if !seen[v] {
                        seen[v] = true;
                        stack.push(v);
                    }
                }
            }
            seen.into_iter().all(|s| s)
        };
        reach(true) && reach(false)
    }

    /// Copy of this graph with all links touching `node` removed.
    pub fn without_node_links(&self, node: usize) -> NetworkGraph {
        let links =
            self.links.iter().filter(|l| l.src != node && l.dst != node).cloned().collect();
        NetworkGraph::new(self.nodes.clone(), links).expect("subgraph of a valid graph is valid")
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("graph serialization cannot fail")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| NetError::InvalidGraph(e.to_string()))
    }
}
