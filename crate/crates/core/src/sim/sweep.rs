use rayon::prelude::*;

use super::{simulate, RoutingTables, Scenario, SimMetrics, SimParams, Strategy};
use crate::circuits::CircuitConfig;
use crate::error::{Error, Result};
use crate::net::{Topology, TrafficDemandMatrix};

/// Normalized loads swept by default.
pub const DEFAULT_LOADS: [f64; 7] = [0.33, 0.67, 1.0, 1.17, 1.33, 1.5, 1.67];

/// Circuits a strategy runs over for each test matrix.
#[derive(Debug, Clone)]
pub enum CircuitPlan {
    None,
    Fixed(CircuitConfig),
    /// One configuration per test matrix; `Err` records why it is missing.
    PerMatrix(Vec<std::result::Result<CircuitConfig, String>>),
}

impl CircuitPlan {
    fn for_matrix(&self, i: usize) -> std::result::Result<Option<&CircuitConfig>, String> {
        match self {
            CircuitPlan::None => Ok(None),
            CircuitPlan::Fixed(c) => Ok(Some(c)),
            CircuitPlan::PerMatrix(v) => match v.get(i) {
                Some(Ok(c)) => Ok(Some(c)),
                Some(Err(e)) => Err(e.clone()),
                None => Err(format!("no circuits for test matrix {}", i + 1)),
            },
        }
    }
}

/// A labelled strategy, e.g. `RT-OptRR`.
#[derive(Debug, Clone)]
pub struct StrategySpec {
    pub label: String,
    pub strategy: Strategy,
    pub circuits: CircuitPlan,
}

/// Metrics of one (strategy, load) cell, averaged over the test matrices.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub strategy: String,
    pub load: f64,
    pub drop_rate: f64,
    pub mean_hops: f64,
    pub router_load_mbps: f64,
    pub frac_routed: f64,
    pub errors: Vec<String>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct SimulationReport {
    pub rows: Vec<SweepRow>,
}

const CSV_HEADER: &str = "strategy,load_multiplier,drop_rate,mean_hops,router_load_mbps,frac_routed,errors";

impl SimulationReport {
    pub fn get(&self, strategy: &str, load: f64) -> Option<&SweepRow> {
        self.rows
            .iter()
            .find(|r| r.strategy == strategy && (r.load - load).abs() <= 1e-9 * load.abs().max(1.0))
    }

    pub fn strategies(&self) -> Vec<&str> {
        let mut out: Vec<&str> = Vec::new();
        for r in &self.rows {
            if !out.contains(&r.strategy.as_str()) {
                out.push(&r.strategy);
            }
        }
        out
    }

    pub fn loads(&self) -> Vec<f64> {
        let mut out: Vec<f64> = Vec::new();
        for r in &self.rows {
            if !out.iter().any(|&l| l == r.load) {
                out.push(r.load);
            }
        }
        out
    }

    pub fn to_csv(&self) -> String {
        let mut out = format!("{CSV_HEADER}\n");
        for r in &self.rows {
            let errors = r.errors.join(" | ").replace([',', '\n', '\r'], ";");
            out.push_str(&format!(
                "{},{},{},{},{},{},{}\n",
                r.strategy, r.load, r.drop_rate, r.mean_hops, r.router_load_mbps, r.frac_routed, errors
            ));
        }
        out
    }

    pub fn parse_csv(text: &str, file: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
        match lines.next() {
            Some((_, h)) if h.trim() == CSV_HEADER => {}
            Some((i, _)) => return Err(Error::parse(file, i + 1, format!("expected header `{CSV_HEADER}`"))),
            None => return Err(Error::parse(file, 1, "empty report")),
        }
        let mut rows = Vec::new();
        for (i, line) in lines {
            let f: Vec<&str> = line.splitn(7, ',').collect();
            if f.len() != 7 {
                return Err(Error::parse(file, i + 1, "expected 7 comma-separated fields"));
            }
            let num = |s: &str| {
                s.trim()
                    .parse::<f64>()
                    .map_err(|_| Error::parse(file, i + 1, format!("`{s}` is not a number")))
            };
            rows.push(SweepRow {
                strategy: f[0].to_string(),
                load: num(f[1])?,
                drop_rate: num(f[2])?,
                mean_hops: num(f[3])?,
                router_load_mbps: num(f[4])?,
                frac_routed: num(f[5])?,
                errors: if f[6].trim().is_empty() {
                    Vec::new()
                } else {
                    f[6].split(" | ").map(str::to_string).collect()
                },
            });
        }
        Ok(SimulationReport { rows })
    }
}

fn ospf_saturates(
    topology: &Topology,
    routing: &RoutingTables,
    matrices: &[TrafficDemandMatrix],
    multiplier: f64,
    params: &SimParams,
) -> Result<bool> {
    let results: Vec<Result<SimMetrics>> = matrices
        .par_iter()
        .map(|rates| {
            simulate(&Scenario {
                topology,
                strategy: Strategy::Ospf,
                circuits: None,
                routing: Some(routing),
                rates,
                multiplier,
                params: params.clone(),
            })
        })
        .collect();
    let mut any = false;
    for r in results {
        any |= r?.saturated;
    }
    Ok(any)
}

/// Smallest load multiplier at which OSPF saturates on any of the matrices,
/// located by bisection to a relative precision of `1e-3`.
pub fn normalize_load(
    topology: &Topology,
    routing: &RoutingTables,
    matrices: &[TrafficDemandMatrix],
    params: &SimParams,
) -> Result<f64> {
    if matrices.is_empty() || matrices.iter().all(|m| m.total() <= 0.0) {
        return Err(Error::Config("cannot normalize load without traffic".into()));
    }
    let (mut lo, mut hi) = (0.0, 1.0);
    let mut doublings = 0;
    while !ospf_saturates(topology, routing, matrices, hi, params)? {
        lo = hi;
        hi *= 2.0;
        doublings += 1;
        if doublings > 200 {
            return Err(Error::Config("OSPF never saturates".into()));
        }
    }
    if lo == 0.0 {
        lo = hi / 2.0;
        while ospf_saturates(topology, routing, matrices, lo, params)? {
            hi = lo;
            lo /= 2.0;
            if lo < 1e-300 {
                return Err(Error::Config("OSPF saturates at every load".into()));
            }
        }
    }
    while hi - lo > 1e-3 * hi {
        let mid = 0.5 * (lo + hi);
        if ospf_saturates(topology, routing, matrices, mid, params)? {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(hi)
}

/// Simulates every strategy at every normalized load (multiplier `load * s0`)
/// over each test matrix and averages the metrics per cell. Failures are
/// recorded in the cell's errors rather than aborting the sweep.
pub fn sweep(
    topology: &Topology,
    matrices: &[TrafficDemandMatrix],
    strategies: &[StrategySpec],
    loads: &[f64],
    s0: f64,
    params: &SimParams,
) -> Result<SimulationReport> {
    if matrices.is_empty() {
        return Err(Error::Config("no test matrices to simulate".into()));
    }
    if !(s0.is_finite() && s0 > 0.0) {
        return Err(Error::Config(format!("saturation multiplier {s0} must be positive")));
    }
    let routing = super::shortest_path_tables(topology, None)?;
    let cells: Vec<(usize, usize, usize)> = (0..strategies.len())
        .flat_map(|s| (0..loads.len()).flat_map(move |l| (0..matrices.len()).map(move |m| (s, l, m))))
        .collect();
    let results: Vec<std::result::Result<SimMetrics, String>> = cells
        .par_iter()
        .map(|&(s, l, m)| {
            let spec = &strategies[s];
            let circuits = spec.circuits.for_matrix(m)?;
            simulate(&Scenario {
                topology,
                strategy: spec.strategy,
                circuits,
                routing: Some(&routing),
                rates: &matrices[m],
                multiplier: loads[l] * s0,
                params: params.clone(),
            })
            .map_err(|e| e.to_string())
        })
        .collect();

    let mut rows = Vec::with_capacity(strategies.len() * loads.len());
    let per_cell = matrices.len();
    for (s, spec) in strategies.iter().enumerate() {
        for (l, &load) in loads.iter().enumerate() {
            let base = (s * loads.len() + l) * per_cell;
            let mut errors = Vec::new();
            let mut ok: Vec<&SimMetrics> = Vec::new();
            for (m, r) in results[base..base + per_cell].iter().enumerate() {
                match r {
                    Ok(x) => ok.push(x),
                    Err(e) => errors.push(format!("matrix {}: {e}", m + 1)),
                }
            }
            let mean = |f: fn(&SimMetrics) -> f64| {
                if ok.is_empty() {
                    f64::NAN
                } else {
                    ok.iter().map(|x| f(x)).sum::<f64>() / ok.len() as f64
                }
            };
            rows.push(SweepRow {
                strategy: spec.label.clone(),
                load,
                drop_rate: mean(|x| x.drop_rate),
                mean_hops: mean(|x| x.mean_hops),
                router_load_mbps: mean(|x| x.router_load_mbps),
                frac_routed: mean(|x| x.frac_routed),
                errors,
            });
        }
    }
    Ok(SimulationReport { rows })
}
