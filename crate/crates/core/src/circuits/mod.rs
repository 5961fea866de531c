//! Attribution of destination flows to IE pairs, and circuit path sets.

mod config;
mod paths;

pub use config::{parse_circuits, write_circuits, CircuitConfig, CircuitEntry, CircuitPath};
pub use paths::paths_from_detailed;

use std::collections::BTreeMap;

use rayon::prelude::*;

use crate::alloc::find_cycle;
use crate::error::{Error, Result};
use crate::net::{build_incidence, ie_pairs, DestinationFlowMatrix, Topology, TrafficDemandMatrix};

/// Relative truncation threshold for proportional splits.
pub const SPLIT_EPSILON: f64 = 1e-4;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Disaggregation {
    Greedy,
    Proportional,
}

impl std::str::FromStr for Disaggregation {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "greedy" => Ok(Disaggregation::Greedy),
            "proportional" => Ok(Disaggregation::Proportional),
            _ => Err(Error::Config(format!("unknown disaggregation `{s}` (greedy, proportional)"))),
        }
    }
}

/// Per-(destination, source, edge) flows `Z`, zeros omitted.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct DetailedFlowSet {
    n: usize,
    m: usize,
    z: BTreeMap<(usize, usize, usize), f64>,
}

impl DetailedFlowSet {
    pub fn new(n: usize, m: usize) -> Self {
        DetailedFlowSet {
            n,
            m,
            z: BTreeMap::new(),
        }
    }

    pub fn node_count(&self) -> usize {
        self.n
    }

    pub fn edge_count(&self) -> usize {
        self.m
    }

    pub fn get(&self, dest: usize, source: usize, edge: usize) -> f64 {
        self.z.get(&(dest, source, edge)).copied().unwrap_or(0.0)
    }

    /// Adds `value` to an entry; entries that end up non-positive are removed.
    pub fn add(&mut self, dest: usize, source: usize, edge: usize, value: f64) {
        let e = self.z.entry((dest, source, edge)).or_insert(0.0);
        *e += value;
        if *e <= 0.0 {
            self.z.remove(&(dest, source, edge));
        }
    }

    /// `((dest, source, edge), flow)` in key order.
    pub fn iter(&self) -> impl Iterator<Item = ((usize, usize, usize), f64)> + '_ {
        self.z.iter().map(|(&k, &v)| (k, v))
    }

    pub fn len(&self) -> usize {
        self.z.len()
    }

    pub fn is_empty(&self) -> bool {
        self.z.is_empty()
    }

    /// Dense edge vector of one pair.
    pub fn pair_flows(&self, dest: usize, source: usize) -> Vec<f64> {
        let mut v = vec![0.0; self.m];
        for (&(_, _, j), &f) in self.z.range((dest, source, 0)..(dest, source + 1, 0)) {
            v[j] = f;
        }
        v
    }

    pub fn has_pair(&self, dest: usize, source: usize) -> bool {
        self.z.range((dest, source, 0)..(dest, source + 1, 0)).next().is_some()
    }

    /// `max_{k,j} |sum_l Z_klj - F_kj|`.
    pub fn attribution_residual(&self, flows: &DestinationFlowMatrix) -> f64 {
        let mut sum = flows.as_matrix().clone();
        for (&(k, _, j), &v) in &self.z {
            sum[(k, j)] -= v;
        }
        sum.iter().fold(0.0, |m, x| m.max(x.abs()))
    }

    /// Net outflow of the pair's flow at every node: `+T` at the source, `-T` at the destination.
    pub fn pair_divergence(&self, topology: &Topology, dest: usize, source: usize) -> Vec<f64> {
        let mut div = vec![0.0; topology.node_count()];
        for (j, f) in self.pair_flows(dest, source).into_iter().enumerate() {
            let e = topology.edge(j);
            div[e.tail] += f;
            div[e.head] -= f;
        }
        div
    }

    /// `max |divergence - expected|` over pairs and nodes.
    pub fn conservation_residual(&self, topology: &Topology, demand: &TrafficDemandMatrix) -> f64 {
        let mut worst = 0.0f64;
        for (k, l) in ie_pairs(self.n) {
            let t = demand.get(k, l);
            let div = self.pair_divergence(topology, k, l);
            for (i, d) in div.into_iter().enumerate() {
                let want = if i == l {
                    t
                } else if i == k {
                    -t
                } else {
                    0.0
                };
                worst = worst.max((d - want).abs());
            }
        }
        worst
    }

    /// Volume the pair delivers into its destination.
    pub fn delivered(&self, topology: &Topology, dest: usize, source: usize) -> f64 {
        -self.pair_divergence(topology, dest, source)[dest]
    }
}

/// Descending `T`, ties by `(k, l)`.
pub fn default_pair_order(demand: &TrafficDemandMatrix) -> Vec<(usize, usize)> {
    let mut pairs: Vec<(usize, usize)> = ie_pairs(demand.n()).collect();
    pairs.sort_by(|a, b| demand.get(b.0, b.1).total_cmp(&demand.get(a.0, a.1)).then(a.cmp(b)));
    pairs
}

pub fn disaggregate_greedy(
    topology: &Topology,
    flows: &DestinationFlowMatrix,
    demand: &TrafficDemandMatrix,
) -> Result<DetailedFlowSet> {
    disaggregate(topology, flows, demand, Disaggregation::Greedy, None)
}

pub fn disaggregate_proportional(
    topology: &Topology,
    flows: &DestinationFlowMatrix,
    demand: &TrafficDemandMatrix,
) -> Result<DetailedFlowSet> {
    disaggregate(topology, flows, demand, Disaggregation::Proportional, None)
}

/// Attributes each destination's flow to its IE pairs, one pair at a time,
/// subtracting from a working copy of `F`. `order` defaults to [`default_pair_order`].
pub fn disaggregate(
    topology: &Topology,
    flows: &DestinationFlowMatrix,
    demand: &TrafficDemandMatrix,
    method: Disaggregation,
    order: Option<&[(usize, usize)]>,
) -> Result<DetailedFlowSet> {
    let n = topology.node_count();
    let m = topology.edge_count();
    if flows.nrows() != n || flows.ncols() != m || demand.n() != n {
        return Err(Error::invalid("flow matrix, demand matrix and topology disagree in size"));
    }
    let tol = 1e-6 * topology.max_capacity();
    let residual = flows.conservation_residual(demand, &build_incidence(topology));
    if residual > tol {
        return Err(Error::invalid(format!(
            "flows do not carry the demands: conservation residual {residual:e} Mb/s"
        )));
    }
    for k in 0..n {
        let row: Vec<f64> = flows.as_matrix().row(k).iter().copied().collect();
        if find_cycle(topology, &row, 0.0).is_some() {
            return Err(Error::invalid(format!(
                "flow toward node {} contains a directed cycle; cancel cycles first",
                k + 1
            )));
        }
    }
    let order = match order {
        Some(o) => {
            let mut seen = vec![false; n * n];
            for &(k, l) in o {
                if k >= n || l >= n || k == l || std::mem::replace(&mut seen[k * n + l], true) {
                    return Err(Error::invalid("pair order must list each IE pair once"));
                }
            }
            if o.len() != n * (n - 1) {
                return Err(Error::invalid("pair order must list each IE pair once"));
            }
            o.to_vec()
        }
        None => default_pair_order(demand),
    };

    let parts: Vec<Result<Vec<((usize, usize, usize), f64)>>> = (0..n)
        .into_par_iter()
        .map(|k| {
            let pairs: Vec<usize> = order
                .iter()
                .filter(|&&(d, l)| d == k && demand.get(d, l) > 0.0)
                .map(|&(_, l)| l)
                .collect();
            let row: Vec<f64> = flows.as_matrix().row(k).iter().copied().collect();
            attribute_destination(topology, k, row, &pairs, demand, method)
        })
        .collect();
    let mut z = DetailedFlowSet::new(n, m);
    for part in parts {
        for ((k, l, j), v) in part? {
            z.add(k, l, j, v);
        }
    }
    let attr = z.attribution_residual(flows);
    let cons = z.conservation_residual(topology, demand);
    if attr > tol || cons > tol {
        return Err(Error::invalid(format!(
            "attribution left residuals (attribution {attr:e}, conservation {cons:e}) above {tol:e}"
        )));
    }
    Ok(z)
}

/// Node order of the acyclic positive-flow subgraph.
fn topological_order(topology: &Topology, w: &[f64]) -> Vec<usize> {
    let n = topology.node_count();
    let mut indeg = vec![0usize; n];
    for (j, e) in topology.edges().iter().enumerate() {
        if w[j] > 0.0 {
            indeg[e.head] += 1;
        }
    }
    let mut ready: Vec<usize> = (0..n).rev().filter(|&i| indeg[i] == 0).collect();
    let mut out = Vec::with_capacity(n);
    while let Some(u) = ready.pop() {
        out.push(u);
        for &j in topology.out_edges(u) {
            if w[j] > 0.0 {
                let h = topology.edge(j).head;
                indeg[h] -= 1;
                if indeg[h] == 0 {
                    ready.push(h);
                }
            }
        }
    }
    out
}

fn attribute_destination(
    topology: &Topology,
    k: usize,
    mut w: Vec<f64>,
    sources: &[usize],
    demand: &TrafficDemandMatrix,
    method: Disaggregation,
) -> Result<Vec<((usize, usize, usize), f64)>> {
    let mut out = Vec::new();
    if sources.is_empty() {
        return Ok(out);
    }
    let topo_order = topological_order(topology, &w);
    let dust = 1e-12 * topology.max_capacity();
    let (last, rest) = sources.split_last().expect("non-empty");
    for &l in rest {
        let t = demand.get(k, l);
        let mut amount = vec![0.0; topology.node_count()];
        amount[l] = t;
        for &i in &topo_order {
            let a = amount[i];
            if i == k || a <= 0.0 {
                continue;
            }
            let mut outs: Vec<usize> = topology.out_edges(i).iter().copied().filter(|&j| w[j] > dust).collect();
            if outs.is_empty() {
                return Err(Error::invalid(format!(
                    "no remaining flow leaves node {} toward {} for pair ({}, {})",
                    i + 1,
                    k + 1,
                    k + 1,
                    l + 1
                )));
            }
            outs.sort_by(|&a, &b| w[b].total_cmp(&w[a]).then(a.cmp(&b)));
            let split = match method {
                Disaggregation::Greedy => greedy_split(&outs, &w, a),
                Disaggregation::Proportional => proportional_split(&outs, &w, a, SPLIT_EPSILON * t),
            };
            for (j, z) in split {
                w[j] = (w[j] - z).max(0.0);
                amount[topology.edge(j).head] += z;
                out.push(((k, l, j), z));
            }
        }
    }
    // the last pair takes whatever remains
    for (j, &v) in w.iter().enumerate() {
        if v > 0.0 {
            out.push(((k, *last, j), v));
        }
    }
    Ok(out)
}

/// `outs` sorted by descending remaining flow.
fn greedy_split(outs: &[usize], w: &[f64], amount: f64) -> Vec<(usize, f64)> {
    if w[outs[0]] >= amount * (1.0 - 1e-12) {
        return vec![(outs[0], amount)];
    }
    let mut rem = amount;
    let mut split = Vec::new();
    for &j in outs {
        if rem <= 0.0 {
            break;
        }
        let z = w[j].min(rem);
        split.push((j, z));
        rem -= z;
    }
    if rem > 0.0 {
        // rounding: the incoming amount slightly exceeds what remains downstream
        split[0].1 += rem;
    }
    split
}

/// `outs` sorted by descending remaining flow.
fn proportional_split(outs: &[usize], w: &[f64], amount: f64, eps: f64) -> Vec<(usize, f64)> {
    let total: f64 = outs.iter().map(|&j| w[j]).sum();
    let mut split: Vec<(usize, f64)> = outs.iter().map(|&j| (j, amount * w[j] / total)).collect();
    let big = 0;
    let mut spare = w[split[big].0] - split[big].1;
    for i in 1..split.len() {
        let z = split[i].1;
        if z < eps && z <= spare {
            split[big].1 += z;
            spare -= z;
            split[i].1 = 0.0;
        }
    }
    split.retain(|&(_, z)| z > 0.0);
    split
}
