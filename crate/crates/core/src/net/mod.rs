//! Network model: topology, incidence matrix, demand and flow matrices.
//!
//! Node indices are zero-based in memory and one-based in every text format.
//! Demand matrices are indexed `[destination, source]`; flow matrices are
//! indexed `[destination, edge]`.

mod feasible;
mod io;
mod merge;
mod series;

pub use feasible::{check_feasible, Feasibility, InfeasibilityCertificate};
pub use io::{
    load_topology, load_traffic_matrix, load_traffic_series, parse_topology, parse_traffic_matrix,
    write_topology, write_traffic_matrix,
};
pub use merge::{merge_nodes, MergeDirective, NodeMap};
pub use series::{TimeWindow, TrafficSeries};

use nalgebra::DMatrix;
use std::collections::VecDeque;

use crate::error::{Error, Result};

/// A directed edge with a capacity in Mb/s.
#[derive(Debug, Clone, PartialEq)]
pub struct Edge {
    pub tail: usize,
    pub head: usize,
    pub capacity: f64,
}

impl Edge {
    pub fn new(tail: usize, head: usize, capacity: f64) -> Self {
        Edge {
            tail,
            head,
            capacity,
        }
    }
}

/// A strongly connected directed network with positive edge capacities.
///
/// Parallel edges are allowed and are kept distinct by edge index.
#[derive(Debug, Clone, PartialEq)]
pub struct Topology {
    names: Vec<String>,
    edges: Vec<Edge>,
    out_edges: Vec<Vec<usize>>,
    in_edges: Vec<Vec<usize>>,
}

impl Topology {
    pub fn new(names: Vec<String>, edges: Vec<Edge>) -> Result<Self> {
        let n = names.len();
        if n < 2 {
            return Err(Error::invalid(format!("topology needs at least 2 nodes, got {n}")));
        }
        for (i, name) in names.iter().enumerate() {
            if name.is_empty() || name.chars().any(char::is_whitespace) {
                return Err(Error::invalid(format!("node {} has an invalid name {name:?}", i + 1)));
            }
            if names[..i].contains(name) {
                return Err(Error::invalid(format!("duplicate node name {name}")));
            }
        }
        let mut out_edges = vec![Vec::new(); n];
        let mut in_edges = vec![Vec::new(); n];
        for (j, e) in edges.iter().enumerate() {
            if e.tail >= n || e.head >= n {
                return Err(Error::invalid(format!(
                    "edge {} references node outside 1..={n}",
                    j + 1
                )));
            }
            if e.tail == e.head {
                return Err(Error::invalid(format!("edge {} is a self-loop", j + 1)));
            }
            if !(e.capacity.is_finite() && e.capacity > 0.0) {
                return Err(Error::invalid(format!(
                    "edge {} has non-positive capacity {}",
                    j + 1,
                    e.capacity
                )));
            }
            out_edges[e.tail].push(j);
            in_edges[e.head].push(j);
        }
        let topo = Topology {
            names,
            edges,
            out_edges,
            in_edges,
        };
        if !topo.is_strongly_connected() {
            return Err(Error::invalid("topology is not strongly connected"));
        }
        Ok(topo)
    }

    /// Builds a topology where every link `(a, b, c)` becomes the two directed
    /// edges `a -> b` and `b -> a`, both with capacity `c`.
    pub fn bidirectional(names: Vec<String>, links: &[(usize, usize, f64)]) -> Result<Self> {
        let edges = links
            .iter()
            .flat_map(|&(a, b, c)| [Edge::new(a, b, c), Edge::new(b, a, c)])
            .collect();
        Topology::new(names, edges)
    }

    pub fn node_count(&self) -> usize {
        self.names.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn name(&self, node: usize) -> &str {
        &self.names[node]
    }

    pub fn node_index(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn edge(&self, j: usize) -> &Edge {
        &self.edges[j]
    }

    pub fn capacities(&self) -> Vec<f64> {
        self.edges.iter().map(|e| e.capacity).collect()
    }

    pub fn max_capacity(&self) -> f64 {
        self.edges.iter().map(|e| e.capacity).fold(0.0, f64::max)
    }

    pub fn out_edges(&self, node: usize) -> &[usize] {
        &self.out_edges[node]
    }

    pub fn in_edges(&self, node: usize) -> &[usize] {
        &self.in_edges[node]
    }

    /// Index of the first edge `tail -> head`, if any.
    pub fn find_edge(&self, tail: usize, head: usize) -> Option<usize> {
        self.out_edges[tail]
            .iter()
            .copied()
            .find(|&j| self.edges[j].head == head)
    }

    fn reachable(&self, start: usize, forward: bool) -> Vec<bool> {
        let mut seen = vec![false; self.node_count()];
        let mut queue = VecDeque::from([start]);
        seen[start] = true;
        while let Some(v) = queue.pop_front() {
            let adj = if forward {
                &self.out_edges[v]
            } else {
                &self.in_edges[v]
            };
            for &j in adj {
                let w = if forward {
                    self.edges[j].head
                } else {
                    self.edges[j].tail
                };
                if !seen[w] {
                    seen[w] = true;
                    queue.push_back(w);
                }
            }
        }
        seen
    }

    pub fn is_strongly_connected(&self) -> bool {
        self.reachable(0, true).iter().all(|&s| s) && self.reachable(0, false).iter().all(|&s| s)
    }
}

/// Node-edge incidence matrix: `+1` where an edge enters a node, `-1` where it leaves.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IncidenceMatrix {
    entries: DMatrix<i8>,
}

impl IncidenceMatrix {
    pub fn nrows(&self) -> usize {
        self.entries.nrows()
    }

    pub fn ncols(&self) -> usize {
        self.entries.ncols()
    }

    pub fn get(&self, node: usize, edge: usize) -> i8 {
        self.entries[(node, edge)]
    }

    pub fn as_matrix(&self) -> &DMatrix<i8> {
        &self.entries
    }

    pub fn to_f64(&self) -> DMatrix<f64> {
        self.entries.map(f64::from)
    }
}

pub fn build_incidence(topology: &Topology) -> IncidenceMatrix {
    let mut entries = DMatrix::zeros(topology.node_count(), topology.edge_count());
    for (j, e) in topology.edges().iter().enumerate() {
        entries[(e.head, j)] = 1;
        entries[(e.tail, j)] = -1;
    }
    IncidenceMatrix { entries }
}

/// Ordered IE pairs `(destination, source)` with `destination != source`, in
/// row-major order.
pub fn ie_pairs(n: usize) -> impl Iterator<Item = (usize, usize)> {
    (0..n).flat_map(move |k| (0..n).filter(move |&l| l != k).map(move |l| (k, l)))
}

/// Position of pair `(k, l)` in the [`ie_pairs`] order.
pub fn pair_index(n: usize, k: usize, l: usize) -> usize {
    debug_assert!(k != l && k < n && l < n);
    k * (n - 1) + if l < k { l } else { l - 1 }
}

/// Traffic demand matrix `T`: `T[k, l]` is the rate from source `l` to
/// destination `k` in Mb/s, and each diagonal entry is the negated sum of its
/// row so that every row sums to zero.
#[derive(Debug, Clone, PartialEq)]
pub struct TrafficDemandMatrix {
    entries: DMatrix<f64>,
}

impl TrafficDemandMatrix {
    /// Builds a demand matrix from off-diagonal demands; the input diagonal is ignored.
    pub fn complete(offdiag: &DMatrix<f64>) -> Result<Self> {
        if offdiag.nrows() != offdiag.ncols() {
            return Err(Error::invalid(format!(
                "demand matrix must be square, got {}x{}",
                offdiag.nrows(),
                offdiag.ncols()
            )));
        }
        let n = offdiag.nrows();
        let mut entries = offdiag.clone();
        for (k, l) in ie_pairs(n) {
            let v = entries[(k, l)];
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::invalid(format!(
                    "demand from node {} to node {} is {v}; demands must be finite and >= 0",
                    l + 1,
                    k + 1
                )));
            }
        }
        for k in 0..n {
            entries[(k, k)] = 0.0;
            let row: f64 = entries.row(k).iter().sum();
            entries[(k, k)] = -row;
        }
        Ok(TrafficDemandMatrix { entries })
    }

    pub fn zeros(n: usize) -> Self {
        TrafficDemandMatrix {
            entries: DMatrix::zeros(n, n),
        }
    }

    /// Builds from a function of `(destination, source)`.
    pub fn from_fn(n: usize, mut f: impl FnMut(usize, usize) -> f64) -> Result<Self> {
        let m = DMatrix::from_fn(n, n, |k, l| if k == l { 0.0 } else { f(k, l) });
        Self::complete(&m)
    }

    pub fn n(&self) -> usize {
        self.entries.nrows()
    }

    /// Demand from `source` to `dest`.
    pub fn get(&self, dest: usize, source: usize) -> f64 {
        self.entries[(dest, source)]
    }

    pub fn as_matrix(&self) -> &DMatrix<f64> {
        &self.entries
    }

    /// Sum of all off-diagonal demands.
    pub fn total(&self) -> f64 {
        -(0..self.n()).map(|k| self.entries[(k, k)]).sum::<f64>()
    }

    pub fn scaled(&self, factor: f64) -> Result<Self> {
        Self::complete(&(&self.entries * factor))
    }

    /// Entry-wise mean of two matrices over the same nodes.
    pub fn mean(a: &Self, b: &Self) -> Result<Self> {
        if a.n() != b.n() {
            return Err(Error::invalid("cannot average demand matrices of different sizes"));
        }
        Self::complete(&((&a.entries + &b.entries) * 0.5))
    }
}

/// Destination-based flows `F`: `F[k, j]` is the flow on edge `j` destined for node `k`.
#[derive(Debug, Clone, PartialEq)]
pub struct DestinationFlowMatrix {
    entries: DMatrix<f64>,
}

impl DestinationFlowMatrix {
    pub fn new(entries: DMatrix<f64>) -> Result<Self> {
        if let Some(v) = entries.iter().find(|v| !(v.is_finite() && **v >= 0.0)) {
            return Err(Error::invalid(format!("flow entries must be finite and >= 0, found {v}")));
        }
        Ok(DestinationFlowMatrix { entries })
    }

    pub fn zeros(n: usize, m: usize) -> Self {
        DestinationFlowMatrix {
            entries: DMatrix::zeros(n, m),
        }
    }

    pub fn nrows(&self) -> usize {
        self.entries.nrows()
    }

    pub fn ncols(&self) -> usize {
        self.entries.ncols()
    }

    pub fn get(&self, dest: usize, edge: usize) -> f64 {
        self.entries[(dest, edge)]
    }

    pub fn as_matrix(&self) -> &DMatrix<f64> {
        &self.entries
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.entries
    }

    /// Per-edge totals `sum_k F[k, j]`.
    pub fn edge_totals(&self) -> Vec<f64> {
        self.entries.column_iter().map(|c| c.sum()).collect()
    }

    /// The matrix `T + F A^T`, which vanishes when flows conserve the demands.
    pub fn conservation_matrix(
        &self,
        demand: &TrafficDemandMatrix,
        incidence: &IncidenceMatrix,
    ) -> DMatrix<f64> {
        demand.as_matrix() + &self.entries * incidence.to_f64().transpose()
    }

    /// `max |T + F A^T|`.
    pub fn conservation_residual(
        &self,
        demand: &TrafficDemandMatrix,
        incidence: &IncidenceMatrix,
    ) -> f64 {
        self.conservation_matrix(demand, incidence).amax()
    }

    /// Largest violation of `sum_k F[k, j] <= c_j`, zero when all capacities hold.
    pub fn capacity_excess(&self, topology: &Topology) -> f64 {
        self.edge_totals()
            .iter()
            .zip(topology.edges())
            .map(|(t, e)| (t - e.capacity).max(0.0))
            .fold(0.0, f64::max)
    }
}
