use super::{CircuitEntry, CircuitPath, DetailedFlowSet};
use crate::error::{Error, Result};
use crate::net::Topology;

/// Widest `from -> to` path over edges with `z > 0`, as edge indices.
fn widest_path(topology: &Topology, z: &[f64], from: usize, to: usize) -> Option<Vec<usize>> {
    let n = topology.node_count();
    let mut width = vec![0.0f64; n];
    let mut via = vec![usize::MAX; n];
    let mut done = vec![false; n];
    width[from] = f64::INFINITY;
    loop {
        let u = (0..n)
            .filter(|&i| !done[i] && width[i] > 0.0)
            .max_by(|&a, &b| width[a].total_cmp(&width[b]).then(b.cmp(&a)))?;
        if u == to {
            break;
        }
        done[u] = true;
        for &j in topology.out_edges(u) {
            let h = topology.edge(j).head;
            let wdt = width[u].min(z[j]);
            if !done[h] && wdt > width[h] {
                width[h] = wdt;
                via[h] = j;
            }
        }
    }
    let mut path = Vec::new();
    let mut v = to;
    while v != from {
        let j = via[v];
        path.push(j);
        v = topology.edge(j).tail;
    }
    path.reverse();
    Some(path)
}

/// Decomposes the pair's flow into paths by repeatedly stripping the widest
/// path's bottleneck. `capacity` is the pair's allocated `T`.
pub fn paths_from_detailed(
    topology: &Topology,
    z: &DetailedFlowSet,
    dest: usize,
    source: usize,
    capacity: f64,
) -> Result<CircuitEntry> {
    if capacity <= 0.0 {
        return Ok(CircuitEntry {
            dest,
            source,
            capacity: 0.0,
            paths: Vec::new(),
        });
    }
    if !z.has_pair(dest, source) {
        return Err(Error::invalid(format!(
            "pair ({}, {}) has capacity {capacity} but no detailed flow",
            dest + 1,
            source + 1
        )));
    }
    let mut rem = z.pair_flows(dest, source);
    let mut raw: Vec<(Vec<usize>, f64)> = Vec::new();
    while let Some(path) = widest_path(topology, &rem, source, dest) {
        let (argmin, amount) = path
            .iter()
            .map(|&j| (j, rem[j]))
            .fold((usize::MAX, f64::INFINITY), |a, b| if b.1 < a.1 { b } else { a });
        for &j in &path {
            rem[j] -= amount;
        }
        rem[argmin] = 0.0;
        raw.push((path, amount));
    }
    let total: f64 = raw.iter().map(|p| p.1).sum();
    if total <= 0.0 {
        return Err(Error::invalid(format!(
            "pair ({}, {}) has no path from source to destination",
            dest + 1,
            source + 1
        )));
    }
    let paths = raw
        .into_iter()
        .map(|(edges, amount)| {
            let mut nodes = vec![source];
            nodes.extend(edges.iter().map(|&j| topology.edge(j).head));
            CircuitPath {
                nodes,
                edges,
                fraction: amount / total,
            }
        })
        .collect();
    Ok(CircuitEntry {
        dest,
        source,
        capacity,
        paths,
    })
}
