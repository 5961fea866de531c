//! Text formats for topologies and traffic matrices.

use nalgebra::DMatrix;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use super::{Edge, Topology, TrafficDemandMatrix, TrafficSeries};
use crate::error::{Error, Result};

fn strip_comment(line: &str) -> &str {
    match line.find('#') {
        Some(i) => line[..i].trim(),
        None => line.trim(),
    }
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

pub fn load_topology(path: impl AsRef<Path>) -> Result<Topology> {
    let path = path.as_ref();
    parse_topology(&read(path)?, &path.display().to_string())
}

/// Parses the `nodes:` / `node` / `edges:` / `edge` layout. `file` labels errors.
pub fn parse_topology(text: &str, file: &str) -> Result<Topology> {
    enum State {
        Header,
        Nodes,
        Edges,
    }
    let mut state = State::Header;
    let mut expected_nodes = 0usize;
    let mut names: Vec<Option<String>> = Vec::new();
    let mut edges = Vec::new();
    let mut last_line = 0;

    for (lineno, raw) in text.lines().enumerate() {
        let lineno = lineno + 1;
        last_line = lineno;
        let line = strip_comment(raw);
        if line.is_empty() {
            continue;
        }
        let toks: Vec<&str> = line.split_whitespace().collect();
        match state {
            State::Header => {
                if toks.len() != 2 || toks[0] != "nodes:" {
                    return Err(Error::parse(file, lineno, "expected `nodes: <n>`"));
                }
                expected_nodes = toks[1]
                    .parse()
                    .map_err(|_| Error::parse(file, lineno, "node count must be an integer"))?;
                names = vec![None; expected_nodes];
                state = State::Nodes;
            }
            State::Nodes if toks == ["edges:"] => {
                if let Some(i) = names.iter().position(Option::is_none) {
                    return Err(Error::parse(
                        file,
                        lineno,
                        format!("node {} was never declared before `edges:`", i + 1),
                    ));
                }
                state = State::Edges;
            }
            State::Nodes => {
                if toks.len() != 3 || toks[0] != "node" {
                    return Err(Error::parse(file, lineno, "expected `node <index> <name>` or `edges:`"));
                }
                let idx: usize = toks[1]
                    .parse()
                    .map_err(|_| Error::parse(file, lineno, "node index must be an integer"))?;
                if idx == 0 || idx > expected_nodes {
                    return Err(Error::parse(
                        file,
                        lineno,
                        format!("node index {idx} outside 1..={expected_nodes}"),
                    ));
                }
                if names[idx - 1].is_some() {
                    return Err(Error::parse(file, lineno, format!("node {idx} declared twice")));
                }
                names[idx - 1] = Some(toks[2].to_string());
            }
            State::Edges => {
                if toks.len() != 4 || toks[0] != "edge" {
                    return Err(Error::parse(
                        file,
                        lineno,
                        "expected `edge <tail-index> <head-index> <capacity-Mbps>`",
                    ));
                }
                let parse_node = |s: &str| -> Result<usize> {
                    let v: usize = s
                        .parse()
                        .map_err(|_| Error::parse(file, lineno, "edge endpoint must be an integer"))?;
                    if v == 0 || v > expected_nodes {
                        return Err(Error::parse(
                            file,
                            lineno,
                            format!("edge endpoint {v} outside 1..={expected_nodes}"),
                        ));
                    }
                    Ok(v - 1)
                };
                let tail = parse_node(toks[1])?;
                let head = parse_node(toks[2])?;
                let cap: f64 = toks[3]
                    .parse()
                    .map_err(|_| Error::parse(file, lineno, "capacity must be a number"))?;
                edges.push(Edge::new(tail, head, cap));
            }
        }
    }
    if !matches!(state, State::Edges) {
        return Err(Error::parse(file, last_line, "missing `edges:` section"));
    }
    let names = names.into_iter().map(Option::unwrap).collect();
    Topology::new(names, edges).map_err(|e| Error::parse(file, last_line, e.to_string()))
}

pub fn write_topology(topology: &Topology) -> String {
    let mut out = String::new();
    writeln!(out, "nodes: {}", topology.node_count()).unwrap();
    for (i, name) in topology.names().iter().enumerate() {
        writeln!(out, "node {} {}", i + 1, name).unwrap();
    }
    writeln!(out, "edges:").unwrap();
    for e in topology.edges() {
        writeln!(out, "edge {} {} {}", e.tail + 1, e.head + 1, e.capacity).unwrap();
    }
    out
}

/// Parses an `n x n` whitespace-separated matrix, multiplying every value by `scale`.
pub fn parse_traffic_matrix(text: &str, n: usize, scale: f64, file: &str) -> Result<TrafficDemandMatrix> {
    let mut rows: Vec<Vec<f64>> = Vec::with_capacity(n);
    let mut last_line = 0;
    for (lineno, raw) in text.lines().enumerate() {
        let lineno = lineno + 1;
        last_line = lineno;
        let line = strip_comment(raw);
        if line.is_empty() {
            continue;
        }
        if rows.len() == n {
            return Err(Error::parse(file, lineno, format!("expected exactly {n} rows")));
        }
        let row: Vec<f64> = line
            .split_whitespace()
            .map(|t| t.parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| Error::parse(file, lineno, "expected decimal numbers"))?;
        if row.len() != n {
            return Err(Error::parse(
                file,
                lineno,
                format!("expected {n} values, found {}", row.len()),
            ));
        }
        rows.push(row);
    }
    if rows.len() != n {
        return Err(Error::parse(
            file,
            last_line,
            format!("expected {n} rows, found {}", rows.len()),
        ));
    }
    let m = DMatrix::from_fn(n, n, |k, l| rows[k][l] * scale);
    TrafficDemandMatrix::complete(&m).map_err(|e| Error::parse(file, last_line, e.to_string()))
}

pub fn load_traffic_matrix(path: impl AsRef<Path>, n: usize, scale: f64) -> Result<TrafficDemandMatrix> {
    let path = path.as_ref();
    parse_traffic_matrix(&read(path)?, n, scale, &path.display().to_string())
}

pub fn write_traffic_matrix(demand: &TrafficDemandMatrix) -> String {
    let mut out = String::new();
    for row in demand.as_matrix().row_iter() {
        let vals: Vec<String> = row.iter().map(|v| v.to_string()).collect();
        writeln!(out, "{}", vals.join(" ")).unwrap();
    }
    out
}

/// Loads a directory of `<unix-timestamp>.tm` files, or a single matrix file
/// (whose stem is used as its timestamp when numeric, otherwise 0).
pub fn load_traffic_series(path: impl AsRef<Path>, n: usize, scale: f64) -> Result<TrafficSeries> {
    let path = path.as_ref();
    if path.is_file() {
        let ts = path
            .file_stem()
            .and_then(|s| s.to_str())
            .and_then(|s| s.parse().ok())
            .unwrap_or(0);
        let m = load_traffic_matrix(path, n, scale)?;
        return TrafficSeries::new(vec![ts], vec![m], TrafficSeries::DEFAULT_INTERVAL);
    }
    let dir = fs::read_dir(path).map_err(|e| Error::io(path, e))?;
    let mut entries = Vec::new();
    for entry in dir {
        let entry = entry.map_err(|e| Error::io(path, e))?;
        let p = entry.path();
        if p.extension().and_then(|e| e.to_str()) != Some("tm") {
            continue;
        }
        let stem = p.file_stem().and_then(|s| s.to_str()).unwrap_or_default();
        let ts: i64 = stem.parse().map_err(|_| {
            Error::parse(p.display().to_string(), 0, "file name must be `<unix-timestamp>.tm`")
        })?;
        entries.push((ts, p));
    }
    if entries.is_empty() {
        return Err(Error::parse(path.display().to_string(), 0, "no `.tm` files found"));
    }
    entries.sort();
    let interval = entries
        .windows(2)
        .map(|w| w[1].0 - w[0].0)
        .min()
        .unwrap_or(TrafficSeries::DEFAULT_INTERVAL);
    let mut timestamps = Vec::with_capacity(entries.len());
    let mut matrices = Vec::with_capacity(entries.len());
    for (ts, p) in entries {
        timestamps.push(ts);
        matrices.push(load_traffic_matrix(&p, n, scale)?);
    }
    TrafficSeries::new(timestamps, matrices, interval)
}
