use std::fmt::Write as _;

use super::{paths_from_detailed, DetailedFlowSet};
use crate::error::{Error, Result};
use crate::net::{ie_pairs, pair_index, Topology, TrafficDemandMatrix};

#[derive(Debug, Clone, PartialEq)]
pub struct CircuitPath {
    /// Node sequence from source to destination.
    pub nodes: Vec<usize>,
    /// Edge indices along the path; empty when read from a file that only lists nodes.
    pub edges: Vec<usize>,
    pub fraction: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CircuitEntry {
    pub dest: usize,
    pub source: usize,
    /// Allocated circuit capacity `T`, Mb/s.
    pub capacity: f64,
    pub paths: Vec<CircuitPath>,
}

/// One entry per IE pair, in pair order.
#[derive(Debug, Clone, PartialEq)]
pub struct CircuitConfig {
    n: usize,
    entries: Vec<CircuitEntry>,
}

impl CircuitConfig {
    pub fn new(n: usize, mut entries: Vec<CircuitEntry>) -> Result<Self> {
        if n < 2 || entries.len() != n * (n - 1) {
            return Err(Error::invalid(format!(
                "circuit configuration for {n} nodes needs {} entries, got {}",
                n * n.saturating_sub(1),
                entries.len()
            )));
        }
        entries.sort_by_key(|e| pair_index(n, e.dest, e.source));
        for (e, (k, l)) in entries.iter().zip(ie_pairs(n)) {
            if (e.dest, e.source) != (k, l) {
                return Err(Error::invalid(format!("missing circuit for pair ({}, {})", k + 1, l + 1)));
            }
            if !(e.capacity.is_finite() && e.capacity >= 0.0) {
                return Err(Error::invalid(format!("circuit ({}, {}) has invalid capacity", k + 1, l + 1)));
            }
            for p in &e.paths {
                let simple = {
                    let mut s = p.nodes.clone();
                    s.sort_unstable();
                    s.dedup();
                    s.len() == p.nodes.len()
                };
                if p.nodes.first() != Some(&l) || p.nodes.last() != Some(&k) || !simple || !(p.fraction > 0.0) {
                    return Err(Error::invalid(format!(
                        "circuit ({}, {}) has a path that is not a simple {} -> {} path with positive fraction",
                        k + 1,
                        l + 1,
                        l + 1,
                        k + 1
                    )));
                }
            }
            if !e.paths.is_empty() {
                let s: f64 = e.paths.iter().map(|p| p.fraction).sum();
                if (s - 1.0).abs() > 1e-6 {
                    return Err(Error::invalid(format!(
                        "circuit ({}, {}) path fractions sum to {s}",
                        k + 1,
                        l + 1
                    )));
                }
            }
        }
        Ok(CircuitConfig { n, entries })
    }

    /// Path decompositions of every pair in `z`.
    pub fn from_detailed(topology: &Topology, z: &DetailedFlowSet, demand: &TrafficDemandMatrix) -> Result<Self> {
        let n = topology.node_count();
        let entries = ie_pairs(n)
            .map(|(k, l)| paths_from_detailed(topology, z, k, l, demand.get(k, l)))
            .collect::<Result<Vec<_>>>()?;
        CircuitConfig::new(n, entries)
    }

    /// Capacities only, without path information.
    pub fn from_capacities(capacities: &TrafficDemandMatrix) -> Self {
        let n = capacities.n();
        let entries = ie_pairs(n)
            .map(|(k, l)| CircuitEntry {
                dest: k,
                source: l,
                capacity: capacities.get(k, l),
                paths: Vec::new(),
            })
            .collect();
        CircuitConfig { n, entries }
    }

    pub fn node_count(&self) -> usize {
        self.n
    }

    pub fn entries(&self) -> &[CircuitEntry] {
        &self.entries
    }

    pub fn get(&self, dest: usize, source: usize) -> &CircuitEntry {
        &self.entries[pair_index(self.n, dest, source)]
    }

    pub fn capacity(&self, dest: usize, source: usize) -> f64 {
        self.get(dest, source).capacity
    }

    pub fn capacities(&self) -> TrafficDemandMatrix {
        TrafficDemandMatrix::from_fn(self.n, |k, l| self.capacity(k, l)).expect("capacities are validated")
    }
}

/// `circuit <k> <l> <T> path <fraction> <node> ...` per path, `circuit <k> <l> <T>`
/// for pairs without paths. Indices are 1-based.
pub fn write_circuits(config: &CircuitConfig) -> String {
    let mut out = String::new();
    for e in &config.entries {
        if e.paths.is_empty() {
            let _ = writeln!(out, "circuit {} {} {}", e.dest + 1, e.source + 1, e.capacity);
        }
        for p in &e.paths {
            let _ = write!(out, "circuit {} {} {} path {}", e.dest + 1, e.source + 1, e.capacity, p.fraction);
            for v in &p.nodes {
                let _ = write!(out, " {}", v + 1);
            }
            out.push('\n');
        }
    }
    out
}

pub fn parse_circuits(text: &str, n: usize, file: &str) -> Result<CircuitConfig> {
    let mut entries: Vec<Option<CircuitEntry>> = vec![None; n * n.saturating_sub(1)];
    for (lineno, raw) in text.lines().enumerate() {
        let lineno = lineno + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let toks: Vec<&str> = line.split_whitespace().collect();
        let bad = |msg: &str| Error::parse(file, lineno, msg.to_string());
        if toks.len() < 4 || toks[0] != "circuit" {
            return Err(bad("expected `circuit <k> <l> <T> [path <fraction> <node> ...]`"));
        }
        let index = |s: &str| -> Result<usize> {
            match s.parse::<usize>() {
                Ok(i) if (1..=n).contains(&i) => Ok(i - 1),
                _ => Err(Error::parse(file, lineno, format!("`{s}` is not a node index in 1..{n}"))),
            }
        };
        let k = index(toks[1])?;
        let l = index(toks[2])?;
        if k == l {
            return Err(bad("circuits join distinct nodes"));
        }
        let cap: f64 = toks[3].parse().map_err(|_| bad("capacity must be a number"))?;
        let slot = &mut entries[pair_index(n, k, l)];
        let entry = slot.get_or_insert_with(|| CircuitEntry {
            dest: k,
            source: l,
            capacity: cap,
            paths: Vec::new(),
        });
        if entry.capacity != cap {
            return Err(bad("capacity differs from an earlier line for the same pair"));
        }
        if toks.len() > 4 {
            if toks[4] != "path" || toks.len() < 7 {
                return Err(bad("expected `path <fraction> <node> <node> ...`"));
            }
            let fraction: f64 = toks[5].parse().map_err(|_| bad("fraction must be a number"))?;
            let nodes = toks[6..].iter().map(|s| index(s)).collect::<Result<Vec<_>>>()?;
            entry.paths.push(CircuitPath {
                nodes,
                edges: Vec::new(),
                fraction,
            });
        }
    }
    let entries = entries
        .into_iter()
        .zip(ie_pairs(n))
        .map(|(e, (k, l))| e.ok_or_else(|| Error::parse(file, 0, format!("no circuit for pair ({}, {})", k + 1, l + 1))))
        .collect::<Result<Vec<_>>>()?;
    CircuitConfig::new(n, entries).map_err(|e| Error::parse(file, 0, e.to_string()))
}
