use nalgebra::DMatrix;

use crate::net::Topology;

/// A directed cycle (as edge indices) among edges with `flow[j] > threshold`.
pub fn find_cycle(topology: &Topology, flow: &[f64], threshold: f64) -> Option<Vec<usize>> {
    let n = topology.node_count();
    // 0 = unvisited, 1 = on stack, 2 = done
    let mut color = vec![0u8; n];
    let mut via = vec![usize::MAX; n];
    for root in 0..n {
        if color[root] != 0 {
            continue;
        }
        let mut stack: Vec<(usize, usize)> = vec![(root, 0)];
        color[root] = 1;
        while let Some(&mut (u, ref mut pos)) = stack.last_mut() {
            let out = topology.out_edges(u);
            if *pos == out.len() {
                color[u] = 2;
                stack.pop();
                continue;
            }
            let j = out[*pos];
            *pos += 1;
            if flow[j] <= threshold {
                continue;
            }
            let v = topology.edge(j).head;
            match color[v] {
                0 => {
                    color[v] = 1;
                    via[v] = j;
                    stack.push((v, 0));
                }
                1 => {
                    let mut cycle = vec![j];
                    let mut w = u;
                    while w != v {
                        let e = via[w];
                        cycle.push(e);
                        w = topology.edge(e).tail;
                    }
                    cycle.reverse();
                    return Some(cycle);
                }
                _ => {}
            }
        }
    }
    None
}

/// Removes every directed cycle from each destination's positive-flow
/// subgraph by subtracting the cycle's bottleneck. Demands are unchanged.
/// Returns the number of cycles cancelled.
pub fn cancel_cycles(topology: &Topology, flows: &mut DMatrix<f64>) -> usize {
    let mut count = 0;
    for k in 0..flows.nrows() {
        let mut row: Vec<f64> = flows.row(k).iter().copied().collect();
        while let Some(cycle) = find_cycle(topology, &row, 0.0) {
            let (argmin, bottleneck) = cycle
                .iter()
                .map(|&j| (j, row[j]))
                .fold((usize::MAX, f64::INFINITY), |a, b| if b.1 < a.1 { b } else { a });
            for &j in &cycle {
                row[j] = (row[j] - bottleneck).max(0.0);
            }
            row[argmin] = 0.0;
            count += 1;
        }
        for (j, v) in row.into_iter().enumerate() {
            flows[(k, j)] = v;
        }
    }
    count
}
