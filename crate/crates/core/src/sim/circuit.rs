use std::collections::VecDeque;

use nalgebra::DMatrix;

use super::{Engine, SimParams, Strategy, VolumeTotals};
use crate::circuits::CircuitConfig;
use crate::error::{Error, Result};

/// Fluid model of traffic riding direct logical circuits, with optional
/// re-routing through intermediate nodes.
///
/// Queues are kept per node, destination and number of re-route hops taken.
#[derive(Debug, Clone)]
pub struct CircuitSim {
    n: usize,
    buckets: usize,
    strategy: Strategy,
    // per-slot capacity of circuit src -> dst at [src * n + dst]
    cap: Vec<f64>,
    lmax: Vec<f64>,
    buffer: Vec<f64>,
    queue: Vec<f64>,
    history: VecDeque<Vec<f64>>,
    window: usize,
    totals: VolumeTotals,
}

impl CircuitSim {
    pub fn new(circuits: &CircuitConfig, strategy: Strategy, params: &SimParams) -> Result<Self> {
        if !strategy.uses_circuits() {
            return Err(Error::Config("OSPF does not run over circuits".into()));
        }
        params.validate()?;
        let n = circuits.node_count();
        if n < 2 {
            return Err(Error::Config("need at least two nodes".into()));
        }
        let mut cap = vec![0.0; n * n];
        let mut lmax = vec![0.0; n * n];
        let mut buffer = vec![0.0; n * n];
        for src in 0..n {
            for dst in (0..n).filter(|&d| d != src) {
                let t = circuits.capacity(dst, src);
                let i = src * n + dst;
                cap[i] = t * params.dt;
                lmax[i] = (params.lmax_secs * t).max(params.lmax_floor);
            }
        }
        for src in 0..n {
            let widest = (0..n)
                .filter(|&d| d != src)
                .map(|d| circuits.capacity(d, src))
                .fold(0.0, f64::max);
            for dst in (0..n).filter(|&d| d != src) {
                let i = src * n + dst;
                buffer[i] = (params.buffer_secs * widest).max(lmax[i]);
            }
        }
        let buckets = n - 1;
        Ok(CircuitSim {
            n,
            buckets,
            strategy,
            cap,
            lmax,
            buffer,
            queue: vec![0.0; n * n * buckets],
            history: VecDeque::new(),
            window: params.window_slots,
            totals: VolumeTotals::default(),
        })
    }

    fn q(&self, node: usize, dest: usize) -> &[f64] {
        let i = (node * self.n + dest) * self.buckets;
        &self.queue[i..i + self.buckets]
    }

    fn q_mut(&mut self, node: usize, dest: usize) -> &mut [f64] {
        let i = (node * self.n + dest) * self.buckets;
        &mut self.queue[i..i + self.buckets]
    }

    /// Queued volume at `node` for `dest`.
    pub fn queued(&self, node: usize, dest: usize) -> f64 {
        self.q(node, dest).iter().sum()
    }

    // Buckets with h <= last_reroutable may take another re-route hop
    // without exceeding n - 1 logical hops in total.
    fn reroutable(&self) -> Option<usize> {
        self.n.checked_sub(3)
    }

    fn serve_direct(&mut self, sent: &mut [f64]) {
        let n = self.n;
        for src in 0..n {
            for dst in (0..n).filter(|&d| d != src) {
                let mut room = self.cap[src * n + dst];
                let mut served = 0.0;
                let mut hops = 0.0;
                let mut routed = 0.0;
                for (h, v) in self.q_mut(src, dst).iter_mut().enumerate() {
                    if room <= 0.0 {
                        break;
                    }
                    let take = v.min(room);
                    *v -= take;
                    room -= take;
                    served += take;
                    hops += take * (h + 1) as f64;
                    if h > 0 {
                        routed += take;
                    }
                }
                sent[src * n + dst] += served;
                self.totals.delivered += served;
                self.totals.hop_volume += hops;
                self.totals.routed += routed;
            }
        }
    }

    // Moves up to `amount` from the eligible buckets of (src, dst) toward `via`.
    fn transfer(&mut self, src: usize, dst: usize, via: usize, amount: f64, incoming: &mut [f64]) -> f64 {
        let Some(last) = self.reroutable() else {
            return 0.0;
        };
        let (n, b) = (self.n, self.buckets);
        let mut left = amount;
        for h in 0..=last {
            if left <= 0.0 {
                break;
            }
            let v = &mut self.queue[(src * n + dst) * b + h];
            let take = v.min(left);
            *v -= take;
            left -= take;
            incoming[(via * n + dst) * b + h + 1] += take;
        }
        let moved = amount - left;
        self.totals.router += moved;
        moved
    }

    fn eligible(&self, src: usize, dst: usize) -> f64 {
        match self.reroutable() {
            Some(last) => self.q(src, dst)[..=last].iter().sum(),
            None => 0.0,
        }
    }

    fn windowed_residual(&self, src: usize, via: usize, sent: &[f64]) -> f64 {
        let i = src * self.n + via;
        let past: f64 = self.history.iter().map(|s| s[i]).sum();
        self.cap[i] * (self.history.len() + 1) as f64 - past - sent[i]
    }

    fn reroute_greedy(&mut self, sent: &mut [f64], incoming: &mut [f64]) {
        let n = self.n;
        let first_blocked = self.reroutable().map_or(0, |l| l + 1);
        for src in 0..n {
            for dst in (0..n).filter(|&d| d != src) {
                if self.queued(src, dst) <= self.lmax[src * n + dst] {
                    continue;
                }
                let over: f64 = self.q_mut(src, dst)[first_blocked..].iter_mut().map(std::mem::take).sum();
                self.totals.dropped += over;
                let mut want = self.eligible(src, dst);
                let mut vias: Vec<(f64, usize)> = (0..n)
                    .filter(|&m| m != src && m != dst)
                    .map(|m| (self.windowed_residual(src, m, sent), m))
                    .collect();
                vias.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
                for (_, via) in vias {
                    if want <= 0.0 {
                        break;
                    }
                    let room = self.cap[src * n + via] - sent[src * n + via];
                    if room <= 0.0 {
                        continue;
                    }
                    let moved = self.transfer(src, dst, via, room.min(want), incoming);
                    sent[src * n + via] += moved;
                    want -= moved;
                }
            }
        }
    }

    fn reroute_backpressure(&mut self, sent: &mut [f64], incoming: &mut [f64]) {
        let n = self.n;
        let snapshot: Vec<f64> = (0..n * n).map(|i| self.queued(i / n, i % n)).collect();
        let mut accepted = vec![0.0; n * n];
        for src in 0..n {
            let mut moves: Vec<(f64, f64, usize, usize)> = Vec::new();
            for dst in (0..n).filter(|&d| d != src) {
                let here = snapshot[src * n + dst];
                if here <= self.lmax[src * n + dst] {
                    continue;
                }
                for via in (0..n).filter(|&m| m != src && m != dst) {
                    let diff = here - snapshot[via * n + dst];
                    if diff > 0.0 {
                        let spare = self.cap[via * n + dst] - sent[via * n + dst];
                        moves.push((diff, spare, via, dst));
                    }
                }
            }
            moves.sort_by(|a, b| {
                b.0.total_cmp(&a.0)
                    .then(b.1.total_cmp(&a.1))
                    .then((a.2, a.3).cmp(&(b.2, b.3)))
            });
            for (_, _, via, dst) in moves {
                let room = self.cap[src * n + via] - sent[src * n + via];
                let space = self.buffer[via * n + dst] - snapshot[via * n + dst] - accepted[via * n + dst];
                let want = self.eligible(src, dst);
                if room <= 0.0 || space <= 0.0 || want <= 0.0 {
                    continue;
                }
                let moved = self.transfer(src, dst, via, room.min(want).min(space), incoming);
                sent[src * n + via] += moved;
                accepted[via * n + dst] += moved;
            }
        }
    }

    fn enforce_buffers(&mut self) {
        let n = self.n;
        for node in 0..n {
            for dst in (0..n).filter(|&d| d != node) {
                let mut excess = self.queued(node, dst) - self.buffer[node * n + dst];
                if excess <= 0.0 {
                    continue;
                }
                let mut dropped = 0.0;
                for v in self.q_mut(node, dst).iter_mut().rev() {
                    let d = v.min(excess);
                    *v -= d;
                    excess -= d;
                    dropped += d;
                    if excess <= 0.0 {
                        break;
                    }
                }
                self.totals.dropped += dropped;
            }
        }
    }
}

impl Engine for CircuitSim {
    fn step(&mut self, arrivals: &DMatrix<f64>) {
        let n = self.n;
        for src in 0..n {
            for dst in (0..n).filter(|&d| d != src) {
                let a = arrivals[(dst, src)];
                self.q_mut(src, dst)[0] += a;
                self.totals.offered += a;
            }
        }
        let mut sent = vec![0.0; n * n];
        self.serve_direct(&mut sent);
        let mut incoming = vec![0.0; self.queue.len()];
        match self.strategy {
            Strategy::GreedyRR => self.reroute_greedy(&mut sent, &mut incoming),
            Strategy::OptRR => self.reroute_backpressure(&mut sent, &mut incoming),
            _ => {}
        }
        for (q, i) in self.queue.iter_mut().zip(&incoming) {
            *q += i;
        }
        self.enforce_buffers();
        self.history.push_back(sent);
        while self.history.len() >= self.window {
            self.history.pop_front();
        }
    }

    fn totals(&self) -> VolumeTotals {
        self.totals
    }

    fn backlog(&self) -> f64 {
        self.queue.iter().sum()
    }
}
