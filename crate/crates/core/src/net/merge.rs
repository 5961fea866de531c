use nalgebra::DMatrix;

use super::{Edge, Topology, TrafficDemandMatrix, TrafficSeries};
use crate::error::{Error, Result};

/// `merge <from-name> <into-name>`: fold one node into another.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MergeDirective {
    pub from: String,
    pub into: String,
}

impl MergeDirective {
    /// Accepts `merge A B`, `A B` or `A:B`.
    pub fn parse(s: &str) -> Result<Self> {
        let s = s.trim();
        let s = s.strip_prefix("merge ").unwrap_or(s);
        let toks: Vec<&str> = if s.contains(':') {
            s.split(':').map(str::trim).collect()
        } else {
            s.split_whitespace().collect()
        };
        match toks.as_slice() {
            [from, into] if !from.is_empty() && !into.is_empty() => Ok(MergeDirective {
                from: from.to_string(),
                into: into.to_string(),
            }),
            _ => Err(Error::invalid(format!("bad merge directive {s:?}, expected `merge <from> <into>`"))),
        }
    }
}

impl std::fmt::Display for MergeDirective {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}:{}", self.from, self.into)
    }
}

/// Maps node indices of the original network onto the merged one.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NodeMap {
    map: Vec<usize>,
    merged_nodes: usize,
}

impl NodeMap {
    pub fn identity(n: usize) -> Self {
        NodeMap {
            map: (0..n).collect(),
            merged_nodes: n,
        }
    }

    pub fn get(&self, original: usize) -> usize {
        self.map[original]
    }

    fn then(&self, next: &NodeMap) -> NodeMap {
        NodeMap {
            map: self.map.iter().map(|&i| next.map[i]).collect(),
            merged_nodes: next.merged_nodes,
        }
    }

    /// Sums demands onto merged nodes; traffic internal to a merged node disappears.
    pub fn apply(&self, demand: &TrafficDemandMatrix) -> Result<TrafficDemandMatrix> {
        if demand.n() != self.map.len() {
            return Err(Error::invalid(format!(
                "demand matrix has {} nodes, merge map expects {}",
                demand.n(),
                self.map.len()
            )));
        }
        let mut out = DMatrix::zeros(self.merged_nodes, self.merged_nodes);
        for (k, l) in super::ie_pairs(demand.n()) {
            let (mk, ml) = (self.map[k], self.map[l]);
            if mk != ml {
                out[(mk, ml)] += demand.get(k, l);
            }
        }
        TrafficDemandMatrix::complete(&out)
    }

    pub fn apply_series(&self, series: &TrafficSeries) -> Result<TrafficSeries> {
        let matrices = series
            .matrices()
            .iter()
            .map(|m| self.apply(m))
            .collect::<Result<Vec<_>>>()?;
        TrafficSeries::new(series.timestamps().to_vec(), matrices, series.interval_secs())
    }
}

fn merge_one(topology: &Topology, directive: &MergeDirective) -> Result<(Topology, NodeMap)> {
    let from = topology
        .node_index(&directive.from)
        .ok_or_else(|| Error::invalid(format!("merge: unknown node {}", directive.from)))?;
    let into = topology
        .node_index(&directive.into)
        .ok_or_else(|| Error::invalid(format!("merge: unknown node {}", directive.into)))?;
    if from == into {
        return Err(Error::invalid("merge: a node cannot be merged into itself"));
    }
    let map: Vec<usize> = (0..topology.node_count())
        .map(|i| {
            let i = if i == from { into } else { i };
            if i > from {
                i - 1
            } else {
                i
            }
        })
        .collect();
    let names = topology
        .names()
        .iter()
        .enumerate()
        .filter(|&(i, _)| i != from)
        .map(|(_, s)| s.clone())
        .collect();
    let edges = topology
        .edges()
        .iter()
        .map(|e| Edge::new(map[e.tail], map[e.head], e.capacity))
        .filter(|e| e.tail != e.head)
        .collect();
    let merged = Topology::new(names, edges)?;
    Ok((
        merged,
        NodeMap {
            map,
            merged_nodes: topology.node_count() - 1,
        },
    ))
}

/// Applies merge directives in order. Edges between merged nodes are removed;
/// other edges are reattached to the surviving node.
pub fn merge_nodes(topology: &Topology, directives: &[MergeDirective]) -> Result<(Topology, NodeMap)> {
    let mut topo = topology.clone();
    let mut map = NodeMap::identity(topology.node_count());
    for d in directives {
        let (t, step) = merge_one(&topo, d)?;
        map = map.then(&step);
        topo = t;
    }
    Ok((topo, map))
}
