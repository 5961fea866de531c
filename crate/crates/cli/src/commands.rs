use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use circalloc::alloc::{parse_flows, residual_report, write_flows, write_summary_csv, AllocationResult, SolveStatus};
use circalloc::circuits::{disaggregate, parse_circuits, write_circuits, CircuitConfig};
use circalloc::net::{
    load_topology, load_traffic_matrix, load_traffic_series, merge_nodes, write_topology, write_traffic_matrix,
    TimeWindow, Topology, TrafficSeries,
};
use circalloc::pipeline::{
    allocate_circuits, fit_history, realtime_plan, realtime_rates, write_fit_quality_csv, CircuitAllocation,
};
use circalloc::sim::{
    normalize_load, shortest_path_tables, simulate, sweep, write_trace_csv, CircuitPlan, Scenario, SimulationReport,
    Strategy, StrategySpec,
};
use circalloc::synth::{experiment_from, test_start, DiurnalTraffic};
use circalloc::utility::{load_utilities, realtime_utilities, write_utilities, UtilityFamily};
use log::{info, warn};

use crate::config::{Mode, RunConfig};
use crate::plot;

fn write(dir: &Path, name: &str, text: &str) -> Result<PathBuf> {
    let path = dir.join(name);
    fs::write(&path, text).with_context(|| format!("writing {}", path.display()))?;
    info!("wrote {}", path.display());
    Ok(path)
}

fn prepare_out(cfg: &RunConfig) -> Result<&Path> {
    fs::create_dir_all(&cfg.out).with_context(|| format!("creating {}", cfg.out.display()))?;
    write(&cfg.out, "config.txt", &cfg.dump())?;
    Ok(&cfg.out)
}

fn require<'a>(value: &'a Option<PathBuf>, key: &str) -> Result<&'a Path> {
    value
        .as_deref()
        .ok_or_else(|| anyhow!("`{key}` is required (set it in the config file or pass --{key})"))
}

/// Topology after the merge directives, plus the matching traffic if requested.
struct Inputs {
    topology: Topology,
    series: Option<TrafficSeries>,
}

fn load_inputs(cfg: &RunConfig, traffic: bool) -> Result<Inputs> {
    let raw = load_topology(require(&cfg.topology, "topology")?)?;
    let (topology, map) = merge_nodes(&raw, &cfg.merge)?;
    let series = if traffic {
        let dir = require(&cfg.traffic_dir, "traffic-dir")?;
        let s = load_traffic_series(dir, raw.node_count(), cfg.units_scale)?;
        Some(if cfg.merge.is_empty() { s } else { map.apply_series(&s)? })
    } else {
        None
    };
    Ok(Inputs { topology, series })
}

fn history_indices(cfg: &RunConfig, series: &TrafficSeries) -> Result<Vec<usize>> {
    let idx = series.select(cfg.window.as_ref(), None, cfg.split_timestamp());
    if idx.is_empty() {
        bail!("{}", no_snapshots("history", cfg, series));
    }
    Ok(idx)
}

fn test_indices(cfg: &RunConfig, series: &TrafficSeries) -> Result<Vec<usize>> {
    let idx = series.select(cfg.window.as_ref(), cfg.split_timestamp(), None);
    if idx.is_empty() {
        bail!("{}", no_snapshots("test", cfg, series));
    }
    Ok(idx)
}

fn no_snapshots(what: &str, cfg: &RunConfig, series: &TrafficSeries) -> String {
    let (a, b) = series.span();
    format!(
        "no {what} snapshots match window {} and split {}; the series spans {a}..={b}",
        cfg.window.map(|w| w.to_string()).unwrap_or_else(|| "(none)".into()),
        cfg.split.map(|d| d.to_string()).unwrap_or_else(|| "(none)".into()),
    )
}

fn fitted(cfg: &RunConfig, series: &TrafficSeries) -> Result<UtilityFamily> {
    let (family, quality) = fit_history(series, &history_indices(cfg, series)?, &cfg.pwl_params(), cfg.alpha()?)?;
    warn_degenerate(&quality);
    Ok(family)
}

fn warn_degenerate(quality: &[circalloc::pipeline::FitQuality]) {
    let bad: Vec<String> = quality
        .iter()
        .filter(|q| q.degenerate)
        .map(|q| format!("({},{})", q.dest + 1, q.source + 1))
        .collect();
    if !bad.is_empty() {
        warn!("{} pair(s) have fewer than two distinct samples and use a degenerate fit: {}", bad.len(), bad.join(" "));
    }
}

pub fn fit(cfg: &RunConfig) -> Result<()> {
    let inputs = load_inputs(cfg, true)?;
    let series = inputs.series.as_ref().unwrap();
    let idx = history_indices(cfg, series)?;
    info!("fitting {} snapshots", idx.len());
    let (family, quality) = fit_history(series, &idx, &cfg.pwl_params(), cfg.alpha()?)?;
    warn_degenerate(&quality);
    let out = prepare_out(cfg)?;
    write(out, "utilities.txt", &write_utilities(&family))?;
    write(out, "fit_quality.csv", &write_fit_quality_csv(&quality))?;
    Ok(())
}

fn utilities_for_allocation(cfg: &RunConfig, inputs: &Inputs) -> Result<UtilityFamily> {
    if let Some(path) = &cfg.utilities {
        return Ok(load_utilities(path)?.with_alpha(cfg.alpha()?));
    }
    let series = inputs
        .series
        .as_ref()
        .ok_or_else(|| anyhow!("either `utilities` or `traffic-dir` is required"))?;
    match cfg.mode {
        Mode::History => fitted(cfg, series),
        Mode::Realtime => {
            let i = match cfg.snapshot {
                Some(ts) => series
                    .index_of(ts)
                    .ok_or_else(|| anyhow!("no snapshot at timestamp {ts}"))?,
                None => series.len() - 1,
            };
            info!("real-time allocation for snapshot {}", series.timestamps()[i]);
            Ok(realtime_utilities(&realtime_rates(series, i)?, cfg.rate_floor, cfg.alpha()?)?)
        }
    }
}

fn check_status(result: &AllocationResult) {
    if result.status == SolveStatus::AlmostSolved {
        warn!("solver converged to reduced accuracy");
    }
}

pub fn allocate(cfg: &RunConfig) -> Result<()> {
    let inputs = load_inputs(cfg, cfg.utilities.is_none())?;
    let family = utilities_for_allocation(cfg, &inputs)?;
    if family.node_count() != inputs.topology.node_count() {
        bail!(
            "utilities cover {} nodes, topology has {}",
            family.node_count(),
            inputs.topology.node_count()
        );
    }
    let CircuitAllocation { result, circuits } = allocate_circuits(&inputs.topology, &family, &cfg.settings()?)?;
    check_status(&result);
    info!(
        "solved in {} iterations, {:.3} s",
        result.stats.iterations, result.stats.solve_time_secs
    );
    let report = residual_report(&inputs.topology, &result)?;
    let out = prepare_out(cfg)?;
    write(out, "demand.tm", &write_traffic_matrix(&result.demand))?;
    write(out, "flows.txt", &write_flows(&result.flows))?;
    write(out, "circuits.txt", &write_circuits(&circuits))?;
    write(out, "allocation.csv", &write_summary_csv(&result))?;
    write(
        out,
        "residuals.txt",
        &format!(
            "objective {}\nmax_conservation {}\nmean_conservation {}\nmax_capacity_rel {}\nmean_capacity_rel {}\n",
            result.objective,
            report.max_conservation,
            report.mean_conservation,
            report.max_capacity_rel,
            report.mean_capacity_rel
        ),
    )?;
    Ok(())
}

pub fn disaggregate_cmd(cfg: &RunConfig) -> Result<()> {
    let topology = load_inputs(cfg, false)?.topology;
    let (n, m) = (topology.node_count(), topology.edge_count());
    let flows_path = require(&cfg.flows, "flows")?;
    let text = fs::read_to_string(flows_path).with_context(|| format!("reading {}", flows_path.display()))?;
    let flows = parse_flows(&text, n, m, &flows_path.display().to_string())?;
    let demand = load_traffic_matrix(require(&cfg.demand, "demand")?, n, 1.0)?;
    let z = disaggregate(&topology, &flows, &demand, cfg.disaggregation, None)?;
    let circuits = CircuitConfig::from_detailed(&topology, &z, &demand)?;
    let out = prepare_out(cfg)?;
    write(out, "circuits.txt", &write_circuits(&circuits))?;
    Ok(())
}

/// `OSPF`, `RT-<s>`, `HIST-<s>` or `FIXED-<s>` (circuits from the `circuits` file).
fn parse_label(label: &str) -> Result<(String, Strategy)> {
    if label.eq_ignore_ascii_case("ospf") {
        return Ok(("OSPF".into(), Strategy::Ospf));
    }
    let (prefix, s) = label
        .split_once('-')
        .ok_or_else(|| anyhow!("strategy {label:?} must be OSPF or <RT|HIST|FIXED>-<NoRR|GreedyRR|OptRR>"))?;
    let s: Strategy = s.parse()?;
    if s == Strategy::Ospf {
        bail!("strategy {label:?}: OSPF takes no circuit prefix");
    }
    let prefix = prefix.to_ascii_uppercase();
    if !["RT", "HIST", "FIXED"].contains(&prefix.as_str()) {
        bail!("strategy {label:?}: unknown circuit source {prefix:?}");
    }
    Ok((format!("{prefix}-{s}"), s))
}

fn default_strategies(cfg: &RunConfig) -> Vec<String> {
    let mut out = vec!["OSPF".to_string()];
    let circuit = [Strategy::NoRR, Strategy::GreedyRR, Strategy::OptRR];
    if cfg.circuits.is_some() {
        out.extend(circuit.iter().map(|s| format!("FIXED-{s}")));
    } else {
        out.extend(circuit.iter().map(|s| format!("RT-{s}")));
        if cfg.window.is_some() {
            out.extend(circuit.iter().map(|s| format!("HIST-{s}")));
        }
    }
    out
}

pub fn simulate_cmd(cfg: &RunConfig) -> Result<()> {
    let params = cfg.sim_params();
    params.validate()?;
    let inputs = load_inputs(cfg, true)?;
    let topology = &inputs.topology;
    let series = inputs.series.as_ref().unwrap();
    let test = test_indices(cfg, series)?;
    let matrices: Vec<_> = test.iter().map(|&i| series.matrices()[i].clone()).collect();
    let labels = if cfg.strategies.is_empty() {
        default_strategies(cfg)
    } else {
        cfg.strategies.clone()
    };
    let settings = cfg.settings()?;

    let mut rt = None;
    let mut hist = None;
    let mut fixed = None;
    let mut specs = Vec::new();
    for label in &labels {
        let (label, strategy) = parse_label(label)?;
        let circuits = match label.split('-').next().unwrap() {
            "OSPF" => CircuitPlan::None,
            "RT" => {
                if rt.is_none() {
                    info!("real-time allocation for {} test snapshots", test.len());
                    rt = Some(realtime_plan(topology, series, &test, &settings));
                }
                CircuitPlan::PerMatrix(rt.clone().unwrap())
            }
            "HIST" => {
                if hist.is_none() {
                    let family = match &cfg.utilities {
                        Some(p) => load_utilities(p)?.with_alpha(cfg.alpha()?),
                        None => {
                            if cfg.window.is_none() {
                                bail!("HIST strategies need a time-of-day window or a `utilities` file");
                            }
                            fitted(cfg, series)?
                        }
                    };
                    let alloc = allocate_circuits(topology, &family, &settings)?;
                    check_status(&alloc.result);
                    hist = Some(alloc.circuits);
                }
                CircuitPlan::Fixed(hist.clone().unwrap())
            }
            _ => {
                if fixed.is_none() {
                    let path = require(&cfg.circuits, "circuits")?;
                    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
                    fixed = Some(parse_circuits(&text, topology.node_count(), &path.display().to_string())?);
                }
                CircuitPlan::Fixed(fixed.clone().unwrap())
            }
        };
        specs.push(StrategySpec {
            label,
            strategy,
            circuits,
        });
    }

    let routing = shortest_path_tables(topology, None)?;
    let s0 = normalize_load(topology, &routing, &matrices, &params)?;
    info!("OSPF saturates at multiplier {s0}");
    let report = sweep(topology, &matrices, &specs, &cfg.loads, s0, &params)?;
    for row in report.rows.iter().filter(|r| !r.errors.is_empty()) {
        warn!("{} at load {}: {}", row.strategy, row.load, row.errors.join("; "));
    }
    let out = prepare_out(cfg)?;
    write(out, "simulation.csv", &report.to_csv())?;
    if cfg.plots {
        plot::write_all(&report, out)?;
    }
    if let Some(load) = cfg.trace_load {
        let mut traced = params.clone();
        traced.trace = true;
        for spec in &specs {
            let circuits = match &spec.circuits {
                CircuitPlan::None => None,
                CircuitPlan::Fixed(c) => Some(c),
                CircuitPlan::PerMatrix(v) => match &v[0] {
                    Ok(c) => Some(c),
                    Err(e) => {
                        warn!("no trace for {}: {e}", spec.label);
                        continue;
                    }
                },
            };
            let m = simulate(&Scenario {
                topology,
                strategy: spec.strategy,
                circuits,
                routing: Some(&routing),
                rates: &matrices[0],
                multiplier: load * s0,
                params: traced.clone(),
            })?;
            write(out, &format!("trace_{}.csv", spec.label), &write_trace_csv(&m.trace))?;
        }
    }
    Ok(())
}

pub fn report(cfg: &RunConfig) -> Result<()> {
    let path = require(&cfg.input, "input")?;
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let report = SimulationReport::parse_csv(&text, &path.display().to_string())?;
    print!("{}", table(&report));
    if cfg.plots {
        let out = prepare_out(cfg)?;
        plot::write_all(&report, out)?;
    }
    Ok(())
}

/// Drop rate per strategy (rows) and load (columns).
pub fn table(report: &SimulationReport) -> String {
    let loads = report.loads();
    let strategies = report.strategies();
    let width = strategies.iter().map(|s| s.len()).max().unwrap_or(8).max(8);
    let mut out = format!("{:width$}", "drop rate");
    for l in &loads {
        out.push_str(&format!(" {:>9}", format!("{l}x")));
    }
    out.push('\n');
    for s in strategies {
        out.push_str(&format!("{s:width$}"));
        for &l in &loads {
            let cell = match report.get(s, l) {
                Some(r) if r.drop_rate.is_finite() => format!("{:.5}", r.drop_rate),
                Some(_) => "failed".into(),
                None => "-".into(),
            };
            out.push_str(&format!(" {cell:>9}"));
        }
        out.push('\n');
    }
    out
}

/// Writes a synthetic backbone, its traffic snapshots and a ready-to-run config.
pub fn synth(cfg: &RunConfig) -> Result<()> {
    let window = cfg.window.unwrap_or(TimeWindow::parse("Wed 15:00-15:30")?);
    let traffic = DiurnalTraffic::abilene(cfg.seed, cfg.utilization)?;
    let exp = experiment_from(&traffic, &window)?;
    let out = prepare_out(cfg)?;
    let topo = write(out, "topology.txt", &write_topology(&exp.topology))?;
    let tm = out.join("tm");
    fs::create_dir_all(&tm).with_context(|| format!("creating {}", tm.display()))?;
    for (ts, m) in exp.series.timestamps().iter().zip(exp.series.matrices()) {
        fs::write(tm.join(format!("{ts}.tm")), write_traffic_matrix(m))?;
    }
    info!("wrote {} snapshots to {}", exp.series.len(), tm.display());
    let mut run = RunConfig {
        topology: Some(topo),
        traffic_dir: Some(tm),
        out: out.join("run"),
        window: Some(window),
        split: Some(test_start()),
        ..RunConfig::default()
    };
    run.seed = cfg.seed;
    run.utilization = cfg.utilization;
    write(out, "run.conf", &run.dump())?;
    Ok(())
}
