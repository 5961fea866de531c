mod circuit;
mod ospf;
mod routing;
mod sweep;

use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;

use crate::circuits::CircuitConfig;
use crate::error::{Error, Result};
use crate::net::{Topology, TrafficDemandMatrix};

pub use circuit::CircuitSim;
pub use ospf::OspfSim;
pub use routing::{mean_route_hops, shortest_path_tables, RoutingTables};
pub use sweep::{
    normalize_load, sweep, CircuitPlan, SimulationReport, StrategySpec, SweepRow, DEFAULT_LOADS,
};

/// Forwarding strategy of a simulation run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Strategy {
    Ospf,
    NoRR,
    GreedyRR,
    OptRR,
}

impl Strategy {
    pub fn uses_circuits(self) -> bool {
        !matches!(self, Strategy::Ospf)
    }

    pub fn name(self) -> &'static str {
        match self {
            Strategy::Ospf => "OSPF",
            Strategy::NoRR => "NoRR",
            Strategy::GreedyRR => "GreedyRR",
            Strategy::OptRR => "OptRR",
        }
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Strategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "ospf" => Ok(Strategy::Ospf),
            "norr" => Ok(Strategy::NoRR),
            "greedyrr" | "greedy" => Ok(Strategy::GreedyRR),
            "optrr" | "opt" => Ok(Strategy::OptRR),
            _ => Err(Error::Config(format!("unknown strategy `{s}`"))),
        }
    }
}

/// Timing and queueing parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct SimParams {
    /// Slot length in seconds.
    pub dt: f64,
    /// Re-routing threshold as seconds of circuit capacity.
    pub lmax_secs: f64,
    pub lmax_floor: f64,
    /// Queue buffer as seconds of circuit (or next-hop link) capacity.
    pub buffer_secs: f64,
    /// Slots in the GreedyRR residual window.
    pub window_slots: usize,
    pub warmup_max_slots: usize,
    pub measure_secs: f64,
    pub trace: bool,
}

impl Default for SimParams {
    fn default() -> Self {
        SimParams {
            dt: 1.0,
            lmax_secs: 0.1,
            lmax_floor: 1e-6,
            buffer_secs: 1.0,
            window_slots: 5,
            warmup_max_slots: 300,
            measure_secs: 300.0,
            trace: false,
        }
    }
}

impl SimParams {
    pub fn validate(&self) -> Result<()> {
        let pos = |x: f64| x.is_finite() && x > 0.0;
        if !pos(self.dt) || !pos(self.buffer_secs) || !pos(self.measure_secs) {
            return Err(Error::Config("dt, buffer and measurement time must be positive".into()));
        }
        if !(self.lmax_secs.is_finite() && self.lmax_secs >= 0.0) || !pos(self.lmax_floor) {
            return Err(Error::Config("re-routing threshold must be non-negative with a positive floor".into()));
        }
        if self.window_slots == 0 {
            return Err(Error::Config("residual window needs at least one slot".into()));
        }
        Ok(())
    }

    fn measure_slots(&self) -> usize {
        ((self.measure_secs / self.dt).round() as usize).max(1)
    }
}

/// Volume counters in Mb.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct VolumeTotals {
    pub offered: f64,
    pub delivered: f64,
    pub dropped: f64,
    /// Sum of delivered volume times its hop count.
    pub hop_volume: f64,
    /// Delivered volume that passed an electronic routing decision.
    pub routed: f64,
    /// Volume processed by electronic routers.
    pub router: f64,
}

impl VolumeTotals {
    fn since(&self, earlier: &VolumeTotals) -> VolumeTotals {
        VolumeTotals {
            offered: self.offered - earlier.offered,
            delivered: self.delivered - earlier.delivered,
            dropped: self.dropped - earlier.dropped,
            hop_volume: self.hop_volume - earlier.hop_volume,
            routed: self.routed - earlier.routed,
            router: self.router - earlier.router,
        }
    }
}

/// One slot of a simulation trace.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceRow {
    pub slot: usize,
    pub measuring: bool,
    pub backlog: f64,
    pub delivered: f64,
    pub dropped: f64,
}

/// Outcome of one simulation run.
#[derive(Debug, Clone, PartialEq)]
pub struct SimMetrics {
    pub drop_rate: f64,
    pub mean_hops: f64,
    pub router_load_mbps: f64,
    pub frac_routed: f64,
    /// Drops or backlog growth during the measurement window.
    pub saturated: bool,
    pub warmup_slots: usize,
    pub measured: VolumeTotals,
    /// Counters over the whole run, warm-up included.
    pub lifetime: VolumeTotals,
    pub backlog_start: f64,
    pub backlog_end: f64,
    pub trace: Vec<TraceRow>,
}

impl SimMetrics {
    /// `offered - delivered - dropped - backlog` over the whole run.
    pub fn conservation_gap(&self) -> f64 {
        self.lifetime.offered - self.lifetime.delivered - self.lifetime.dropped - self.backlog_end
    }
}

/// A slot-stepped fluid engine.
pub trait Engine {
    /// Advances one slot with the given arriving volumes (`[dest, source]`, Mb).
    fn step(&mut self, arrivals: &DMatrix<f64>);
    fn totals(&self) -> VolumeTotals;
    /// Volume waiting in queues or in flight.
    fn backlog(&self) -> f64;
}

/// Everything needed for one simulation run.
#[derive(Debug, Clone)]
pub struct Scenario<'a> {
    pub topology: &'a Topology,
    pub strategy: Strategy,
    pub circuits: Option<&'a CircuitConfig>,
    pub routing: Option<&'a RoutingTables>,
    pub rates: &'a TrafficDemandMatrix,
    pub multiplier: f64,
    pub params: SimParams,
}

const STATIONARY_SLOTS: usize = 5;

/// Runs warm-up until the backlog is stationary (or the warm-up cap), then
/// measures for `params.measure_secs`.
pub fn simulate(scenario: &Scenario) -> Result<SimMetrics> {
    let p = &scenario.params;
    p.validate()?;
    let n = scenario.topology.node_count();
    if scenario.rates.n() != n {
        return Err(Error::Config(format!(
            "traffic matrix has {} nodes, topology has {n}",
            scenario.rates.n()
        )));
    }
    if !(scenario.multiplier.is_finite() && scenario.multiplier >= 0.0) {
        return Err(Error::Config(format!("load multiplier {} must be >= 0", scenario.multiplier)));
    }
    let mut arrivals = scenario.rates.as_matrix() * (scenario.multiplier * p.dt);
    arrivals.fill_diagonal(0.0);

    let owned_routing;
    let mut engine: Box<dyn Engine> = match scenario.strategy {
        Strategy::Ospf => {
            let routing = match scenario.routing {
                Some(r) => r,
                None => {
                    owned_routing = shortest_path_tables(scenario.topology, None)?;
                    &owned_routing
                }
            };
            Box::new(OspfSim::new(scenario.topology, routing, p)?)
        }
        s => {
            let circuits = scenario
                .circuits
                .ok_or_else(|| Error::Config(format!("{s} needs a circuit configuration")))?;
            Box::new(CircuitSim::new(circuits, s, p)?)
        }
    };

    let mut trace = Vec::new();
    let mut record = |slot: usize, measuring: bool, e: &dyn Engine, before: &VolumeTotals| {
        if p.trace {
            let d = e.totals().since(before);
            trace.push(TraceRow {
                slot,
                measuring,
                backlog: e.backlog(),
                delivered: d.delivered,
                dropped: d.dropped,
            });
        }
    };

    let per_slot = arrivals.sum();
    let mut prev = engine.backlog();
    let mut still = 0;
    let mut warmup = 0;
    while warmup < p.warmup_max_slots && still < STATIONARY_SLOTS {
        let before = engine.totals();
        engine.step(&arrivals);
        warmup += 1;
        record(warmup, false, engine.as_ref(), &before);
        let b = engine.backlog();
        if (b - prev).abs() <= 1e-12 * (b + per_slot).max(1e-300) {
            still += 1;
        } else {
            still = 0;
        }
        prev = b;
    }

    let start = engine.totals();
    let backlog_start = engine.backlog();
    for s in 0..p.measure_slots() {
        let before = engine.totals();
        engine.step(&arrivals);
        record(warmup + s + 1, true, engine.as_ref(), &before);
    }
    let lifetime = engine.totals();
    let measured = lifetime.since(&start);
    let backlog_end = engine.backlog();

    let ratio = |a: f64, b: f64| if b > 0.0 { a / b } else { 0.0 };
    let secs = p.measure_slots() as f64 * p.dt;
    let (mean_hops, frac_routed) = match scenario.strategy {
        Strategy::Ospf => {
            let routing = match scenario.routing {
                Some(r) => mean_route_hops(scenario.topology, r, scenario.rates),
                None => mean_route_hops(
                    scenario.topology,
                    &shortest_path_tables(scenario.topology, None)?,
                    scenario.rates,
                ),
            };
            (routing, if measured.delivered > 0.0 { 1.0 } else { 0.0 })
        }
        _ => (
            ratio(measured.hop_volume, measured.delivered),
            ratio(measured.routed, measured.delivered),
        ),
    };
    let saturated = measured.dropped > 1e-12 * measured.offered.max(1e-300)
        || backlog_end - backlog_start > 1e-7 * measured.offered;
    Ok(SimMetrics {
        drop_rate: ratio(measured.dropped, measured.offered),
        mean_hops,
        router_load_mbps: measured.router / (n as f64 * secs),
        frac_routed,
        saturated,
        warmup_slots: warmup,
        measured,
        lifetime,
        backlog_start,
        backlog_end,
        trace,
    })
}

/// Trace rows as CSV.
pub fn write_trace_csv(trace: &[TraceRow]) -> String {
    let mut out = String::from("slot,measuring,backlog,delivered,dropped\n");
    for r in trace {
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            r.slot, r.measuring as u8, r.backlog, r.delivered, r.dropped
        ));
    }
    out
}

#[cfg(test)]
mod tests;
