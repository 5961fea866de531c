use nalgebra::DMatrix;

use super::{Engine, RoutingTables, SimParams, VolumeTotals};
use crate::error::{Error, Result};
use crate::net::Topology;

/// Hop-by-hop fluid model of shortest-path IP routing over the physical links.
///
/// Volume advances one link per slot; links shared by several queues are
/// divided in proportion to queue size.
#[derive(Debug, Clone)]
pub struct OspfSim {
    n: usize,
    heads: Vec<usize>,
    link_cap: Vec<f64>,
    // next edge of (node, dest) at [node * n + dest]
    next: Vec<usize>,
    buffer: Vec<f64>,
    queue: Vec<f64>,
    totals: VolumeTotals,
}

impl OspfSim {
    pub fn new(topology: &Topology, routing: &RoutingTables, params: &SimParams) -> Result<Self> {
        params.validate()?;
        let n = topology.node_count();
        if routing.node_count() != n {
            return Err(Error::Config("routing tables do not match the topology".into()));
        }
        let mut next = vec![usize::MAX; n * n];
        let mut buffer = vec![0.0; n * n];
        for node in 0..n {
            for dest in (0..n).filter(|&d| d != node) {
                let j = routing
                    .next_edge(node, dest)
                    .ok_or_else(|| Error::Config(format!("no route from node {} to node {}", node + 1, dest + 1)))?;
                next[node * n + dest] = j;
                buffer[node * n + dest] = params.buffer_secs * topology.edge(j).capacity;
            }
        }
        Ok(OspfSim {
            n,
            heads: topology.edges().iter().map(|e| e.head).collect(),
            link_cap: topology.edges().iter().map(|e| e.capacity * params.dt).collect(),
            next,
            buffer,
            queue: vec![0.0; n * n],
            totals: VolumeTotals::default(),
        })
    }

    pub fn queued(&self, node: usize, dest: usize) -> f64 {
        self.queue[node * self.n + dest]
    }
}

impl Engine for OspfSim {
    fn step(&mut self, arrivals: &DMatrix<f64>) {
        let n = self.n;
        for src in 0..n {
            for dst in (0..n).filter(|&d| d != src) {
                let a = arrivals[(dst, src)];
                self.queue[src * n + dst] += a;
                self.totals.offered += a;
            }
        }
        let mut load = vec![0.0; self.link_cap.len()];
        for (i, &j) in self.next.iter().enumerate() {
            if j != usize::MAX {
                load[j] += self.queue[i];
            }
        }
        let share: Vec<f64> = load
            .iter()
            .zip(&self.link_cap)
            .map(|(&l, &c)| if l > c { c / l } else { 1.0 })
            .collect();
        let mut incoming = vec![0.0; n * n];
        for (i, &j) in self.next.iter().enumerate() {
            if j == usize::MAX {
                continue;
            }
            let send = self.queue[i] * share[j];
            self.queue[i] -= send;
            self.totals.router += send;
            let (head, dest) = (self.heads[j], i % n);
            if head == dest {
                self.totals.delivered += send;
                self.totals.routed += send;
            } else {
                incoming[head * n + dest] += send;
            }
        }
        for (i, v) in incoming.into_iter().enumerate() {
            self.queue[i] += v;
            let excess = self.queue[i] - self.buffer[i];
            if excess > 0.0 {
                self.queue[i] -= excess;
                self.totals.dropped += excess;
            }
        }
    }

    fn totals(&self) -> VolumeTotals {
        self.totals
    }

    fn backlog(&self) -> f64 {
        self.queue.iter().sum()
    }
}
