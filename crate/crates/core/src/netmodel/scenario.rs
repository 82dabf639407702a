use serde::{Deserialize, Serialize};

use super::{NetError, NetworkGraph, PathSpec, Result, TrafficMatrix};

/// One network configuration: topology, routed flows and their traffic.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub graph: NetworkGraph,
    pub paths: Vec<PathSpec>,
    pub traffic: TrafficMatrix,
}

impl Scenario {
    pub fn new(graph: NetworkGraph, paths: Vec<PathSpec>, traffic: TrafficMatrix) -> Result<Self> {
        let s = Self { graph, paths, traffic };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if self.paths.len() != self.traffic.len() {
            return Err(NetError::InvalidArgument(format!(
                "{} paths but {} traffic rows",
                self.paths.len(),
                self.traffic.len()
            )));
        }
        for p in &self.paths {
            p.validate(&self.graph)?;
        }
        self.traffic.validate()
    }

    pub fn path_count(&self) -> usize {
        self.paths.len()
    }
}
