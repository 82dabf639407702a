use std::collections::VecDeque;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::{NetError, NetworkGraph, Result};
use crate::seed;

/// A routed flow: the ordered link ids from `source` to `destination`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PathSpec {
    pub source: usize,
    pub destination: usize,
    pub links: Vec<usize>,
}

impl PathSpec {
    /// Rebuilds a path from its link ids, checking incidence and simplicity.
    pub fn from_links(graph: &NetworkGraph, links: Vec<usize>) -> Result<Self> {
        let first = *links
            .first()
            .ok_or_else(|| NetError::InvalidArgument("a path needs at least one link".into()))?;
        if let Some(&bad) = links.iter().find(|&&l| l >= graph.link_count()) {
            return Err(NetError::InvalidArgument(format!("path uses unknown link {bad}")));
        }
        let last = *links.last().expect("non-empty");
        let path = Self {
            source: graph.link(first).src,
            destination: graph.link(last).dst,
            links,
        };
        path.validate(graph)?;
        Ok(path)
    }

    pub fn hop_count(&self) -> usize {
        self.links.len()
    }

    /// Node sequence `source, ..., destination`.
    pub fn nodes(&self, graph: &NetworkGraph) -> Vec<usize> {
        let mut nodes = Vec::with_capacity(self.links.len() + 1);
        nodes.push(self.source);
        nodes.extend(self.links.iter().map(|&l| graph.link(l).dst));
        nodes
    }

    pub fn validate(&self, graph: &NetworkGraph) -> Result<()> {
        let invalid = |msg: String| Err(NetError::InvalidArgument(msg));
        if self.links.is_empty() {
            return invalid("empty path".into());
        }
        if self.links.iter().any(|&l| l >= graph.link_count()) {
            return invalid("path references a missing link".into());
        }
        if graph.link(self.links[0]).src != self.source {
            return invalid("first link does not leave the source".into());
        }
        if graph.link(*self.links.last().unwrap()).dst != self.destination {
            return invalid("last link does not reach the destination".into());
        }
        for w in self.links.windows(2) {
            if graph.link(w[0]).dst != graph.link(w[1]).src {
                return invalid(format!("links {} and {} are not incident", w[0], w[1]));
            }
        }
        let mut nodes = self.nodes(graph);
        nodes.sort_unstable();
        if nodes.windows(2).any(|w| w[0] == w[1]) {
            return invalid("path revisits a node".into());
        }
        Ok(())
    }
}

/// Hop distances from every node *to* `target` (`None` if unreachable).
fn hops_to(graph: &NetworkGraph, target: usize) -> Vec<Option<usize>> {
    let mut dist = vec![None; graph.node_count()];
    dist[target] = Some(0);
    let mut queue = VecDeque::from([target]);
    while let Some(v) = queue.pop_front() {
        let d = dist[v].unwrap();
        for &l in graph.in_links(v) {
            let u = graph.link(l).src;
            if dist[u].is_none() {
                dist[u] = Some(d + 1);
                queue.push_back(u);
            }
        }
    }
    dist
}

/// Minimum-hop route. Among equal-length routes the lexicographically
/// smallest node sequence wins, so the result never depends on link order.
pub fn shortest_path(graph: &NetworkGraph, src: usize, dst: usize) -> Result<PathSpec> {
    let n = graph.node_count();
    if src >= n || dst >= n {
        return Err(NetError::InvalidArgument(format!("nodes {src}/{dst} not in graph of {n}")));
    }
    if src == dst {
        return Err(NetError::InvalidArgument(format!("source equals destination ({src})")));
    }
    let dist = hops_to(graph, dst);
    let Some(mut remaining) = dist[src] else {
        return Err(NetError::NoPath { src, dst });
    };
    // Walking greedily to the smallest successor that is one hop closer
    // yields the lexicographically smallest shortest route.
    let mut links = Vec::with_capacity(remaining);
    let mut at = src;
    while at != dst {
        let next = graph
            .successors(at)
            .into_iter()
            .find(|&v| dist[v] == Some(remaining - 1))
            .expect("BFS distances guarantee a closer successor");
        links.push(graph.link_id(at, next).expect("successor is adjacent"));
        at = next;
        remaining -= 1;
    }
    Ok(PathSpec { source: src, destination: dst, links })
}

/// Seeded sample, without replacement, of ordered pairs whose shortest
/// route has between 1 and `max_hops` hops.
pub fn select_path_pairs(
    graph: &NetworkGraph,
    count: usize,
    max_hops: usize,
    seed: u64,
) -> Result<Vec<(usize, usize)>> {
    let mut candidates = Vec::new();
    for dst in 0..graph.node_count() {
        let dist = hops_to(graph, dst);
        for (src, d) in dist.iter().enumerate() {
            if let Some(d) = *d {
                if src != dst && (1..=max_hops).contains(&d) {
                    candidates.push((src, dst));
                }
            }
        }
    }
    if count > candidates.len() {
        return Err(NetError::InvalidArgument(format!(
            "requested {count} pairs but only {} have routes within {max_hops} hops",
            candidates.len()
        )));
    }
    candidates.sort_unstable();
    let mut rng = seed::rng(seed);
    let (chosen, _) = candidates.partial_shuffle(&mut rng, count);
    Ok(chosen.to_vec())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::netmodel::{gen_grid, gen_nsfnet, RadioConfig};

    #[test]
    fn adjacent_grid_nodes_use_the_direct_link() {
        let g = gen_grid(4, 4, 30.0, &RadioConfig::default()).unwrap();
        let p = shortest_path(&g, 0, 1).unwrap();
        assert_eq!(p.hop_count(), 1);
        assert_eq!(p.links, vec![g.link_id(0, 1).unwrap()]);
    }

    #[test]
    fn ties_go_to_the_smallest_node_sequence() {
        // At 12 dBm only orthogonal links exist; 0 -> 5 has two 2-hop routes
        // via 1 or via 4.
        let g = gen_grid(4, 4, 30.0, &RadioConfig::default().with_ptx(12.0)).unwrap();
        let p = shortest_path(&g, 0, 5).unwrap();
        assert_eq!(p.nodes(&g), vec![0, 1, 5]);
        let p = shortest_path(&g, 5, 0).unwrap();
        assert_eq!(p.nodes(&g), vec![5, 1, 0]);
    }

    #[test]
    fn unreachable_and_bad_arguments() {
        let g = gen_nsfnet().without_node_links(6);
        assert_eq!(shortest_path(&g, 0, 6), Err(NetError::NoPath { src: 0, dst: 6 }));
        assert!(shortest_path(&g, 2, 2).is_err());
        assert!(shortest_path(&g, 0, 99).is_err());
    }

    #[test]
    fn path_validation() {
        let g = gen_nsfnet();
        let p = shortest_path(&g, 0, 12).unwrap();
        assert!(p.validate(&g).is_ok());
        assert_eq!(PathSpec::from_links(&g, p.links.clone()).unwrap(), p);
        let mut broken = p.clone();
        broken.links.reverse();
        assert!(broken.validate(&g).is_err());
        // 0 -> 1 -> 0 revisits the source.
        let loop_links = vec![g.link_id(0, 1).unwrap(), g.link_id(1, 0).unwrap()];
        assert!(PathSpec::from_links(&g, loop_links).is_err());
    }

    #[test]
    fn pair_selection() {
        let g = gen_nsfnet();
        assert!(select_path_pairs(&g, 0, 3, 1).unwrap().is_empty());
        let a = select_path_pairs(&g, 10, 3, 42).unwrap();
        assert_eq!(a, select_path_pairs(&g, 10, 3, 42).unwrap());
        assert_eq!(a.len(), 10);
        let mut dedup = a.clone();
        dedup.sort_unstable();
        dedup.dedup();
        assert_eq!(dedup.len(), 10);
        assert!(select_path_pairs(&g, 10_000, 3, 1).is_err());
    }
}
