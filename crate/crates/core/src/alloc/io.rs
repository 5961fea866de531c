use nalgebra::DMatrix;
use std::fmt::Write as _;

use super::AllocationResult;
use crate::error::{Error, Result};
use crate::net::{ie_pairs, DestinationFlowMatrix};

/// One `flow <dest> <edge> <Mbps>` line per nonzero entry, 1-based.
pub fn write_flows(flows: &DestinationFlowMatrix) -> String {
    let mut out = String::new();
    let f = flows.as_matrix();
    for k in 0..f.nrows() {
        for j in 0..f.ncols() {
            if f[(k, j)] != 0.0 {
                let _ = writeln!(out, "flow {} {} {}", k + 1, j + 1, f[(k, j)]);
            }
        }
    }
    out
}

pub fn parse_flows(text: &str, n: usize, m: usize, file: &str) -> Result<DestinationFlowMatrix> {
    let mut f = DMatrix::zeros(n, m);
    for (lineno, raw) in text.lines().enumerate() {
        let lineno = lineno + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let toks: Vec<&str> = line.split_whitespace().collect();
        let bad = || Error::parse(file, lineno, format!("expected `flow <dest 1..{n}> <edge 1..{m}> <Mbps>`"));
        if toks.len() != 4 || toks[0] != "flow" {
            return Err(bad());
        }
        let k: usize = toks[1].parse().map_err(|_| bad())?;
        let j: usize = toks[2].parse().map_err(|_| bad())?;
        let v: f64 = toks[3].parse().map_err(|_| bad())?;
        if k == 0 || k > n || j == 0 || j > m || !(v.is_finite() && v >= 0.0) {
            return Err(bad());
        }
        f[(k - 1, j - 1)] += v;
    }
    DestinationFlowMatrix::new(f)
}

/// CSV `pair,k,l,T_star,phi,U` with 1-based indices, in pair order.
pub fn write_summary_csv(result: &AllocationResult) -> String {
    let n = result.demand.n();
    let mut out = String::from("pair,k,l,T_star,phi,U\n");
    for (p, (k, l)) in ie_pairs(n).enumerate() {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{}",
            p + 1,
            k + 1,
            l + 1,
            result.demand.get(k, l),
            result.phi[p],
            result.utility[p]
        );
    }
    out
}
