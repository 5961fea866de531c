use std::collections::BinaryHeap;
use std::cmp::Reverse;

use crate::error::{Error, Result};
use crate::net::{ie_pairs, Topology, TrafficDemandMatrix};

/// Per-destination next-hop edges of single shortest paths.
#[derive(Debug, Clone, PartialEq)]
pub struct RoutingTables {
    n: usize,
    // next[k * n + i] = edge leaving i toward k (usize::MAX when i == k)
    next: Vec<usize>,
    dist: Vec<f64>,
}

impl RoutingTables {
    pub fn node_count(&self) -> usize {
        self.n
    }

    /// Edge that node `at` uses toward `dest`; `None` at the destination.
    pub fn next_edge(&self, at: usize, dest: usize) -> Option<usize> {
        match self.next[dest * self.n + at] {
            usize::MAX => None,
            j => Some(j),
        }
    }

    pub fn distance(&self, from: usize, dest: usize) -> f64 {
        self.dist[dest * self.n + from]
    }

    /// Node sequence of the route `from -> dest`.
    pub fn path(&self, topology: &Topology, from: usize, dest: usize) -> Vec<usize> {
        let mut nodes = vec![from];
        let mut at = from;
        while let Some(j) = self.next_edge(at, dest) {
            at = topology.edge(j).head;
            nodes.push(at);
        }
        nodes
    }

    pub fn hops(&self, topology: &Topology, from: usize, dest: usize) -> usize {
        self.path(topology, from, dest).len() - 1
    }
}

/// Dijkstra toward every destination. Among equal-length routes the next hop
/// with the lowest node index wins (then the lowest edge index), so every
/// destination's routes form a tree.
pub fn shortest_path_tables(topology: &Topology, weights: Option<&[f64]>) -> Result<RoutingTables> {
    let n = topology.node_count();
    let m = topology.edge_count();
    let unit = vec![1.0; m];
    let w = weights.unwrap_or(&unit);
    if w.len() != m || w.iter().any(|x| !(x.is_finite() && *x > 0.0)) {
        return Err(Error::invalid("edge weights must be positive, one per edge"));
    }
    let mut next = vec![usize::MAX; n * n];
    let mut dist = vec![f64::INFINITY; n * n];
    for k in 0..n {
        let d = &mut dist[k * n..(k + 1) * n];
        d[k] = 0.0;
        let mut heap = BinaryHeap::new();
        heap.push(Reverse((OrdF64(0.0), k)));
        while let Some(Reverse((OrdF64(du), u))) = heap.pop() {
            if du > d[u] {
                continue;
            }
            for &j in topology.in_edges(u) {
                let t = topology.edge(j).tail;
                let cand = du + w[j];
                if cand < d[t] {
                    d[t] = cand;
                    heap.push(Reverse((OrdF64(cand), t)));
                }
            }
        }
        for i in (0..n).filter(|&i| i != k) {
            let best = topology
                .out_edges(i)
                .iter()
                .copied()
                .filter(|&j| {
                    let h = topology.edge(j).head;
                    (d[h] + w[j] - d[i]).abs() <= 1e-12 * (1.0 + d[i])
                })
                .min_by_key(|&j| (topology.edge(j).head, j))
                .ok_or_else(|| Error::invalid("topology is not strongly connected"))?;
            next[k * n + i] = best;
        }
    }
    Ok(RoutingTables { n, next, dist })
}

#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
struct OrdF64(f64);
impl Eq for OrdF64 {}
impl Ord for OrdF64 {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.0.total_cmp(&other.0)
    }
}

/// Traffic-weighted mean route length in hops.
pub fn mean_route_hops(topology: &Topology, tables: &RoutingTables, rates: &TrafficDemandMatrix) -> f64 {
    let (mut num, mut den) = (0.0, 0.0);
    for (k, l) in ie_pairs(topology.node_count()) {
        let r = rates.get(k, l);
        num += r * tables.hops(topology, l, k) as f64;
        den += r;
    }
    if den > 0.0 {
        num / den
    } else {
        0.0
    }
}
