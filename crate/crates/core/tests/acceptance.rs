//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! Runs without the libtest harness so every line is printed even when a
//! criterion fails. The process exits non-zero if any criterion fails.

mod common;

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::sync::OnceLock;
use std::time::Instant;

use circalloc::alloc::{build_problem, find_cycle, maxmin_oracle, residual_report, AllocationResult, SolverTolerances};
use circalloc::circuits::{disaggregate_greedy, disaggregate_proportional, CircuitConfig, DetailedFlowSet};
use circalloc::net::{
    check_feasible, ie_pairs, load_topology, load_traffic_series, merge_nodes, Edge, Feasibility, MergeDirective,
    TimeWindow, Topology, TrafficDemandMatrix, TrafficSeries,
};
use circalloc::pipeline::{allocate_circuits, fit_history, realtime_plan, AllocationSettings};
use circalloc::sim::{
    normalize_load, shortest_path_tables, sweep, CircuitPlan, CircuitSim, Engine, SimParams, SimulationReport,
    Strategy, StrategySpec, DEFAULT_LOADS,
};
use circalloc::synth::{abilene_experiment, abilene_topology, SyntheticExperiment, ABILENE_LINK_MBPS};
use circalloc::utility::{
    alpha_utility, fit_concave_pwl, realtime_utilities, AlphaFairness, ConcavePwl, EmpiricalCdf, PwlFitParams,
};
use clarabel::solver::SolverStatus;
use common::{linear_family, random_instance, rel, PerPairProgram};
use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Triangular, Uniform};

enum Verdict {
    Pass,
    Fail,
}

struct Outcome {
    verdict: Verdict,
    detail: String,
}

impl Outcome {
    fn check(pass: bool, detail: impl Into<String>) -> Self {
        Outcome {
            verdict: if pass { Verdict::Pass } else { Verdict::Fail },
            detail: detail.into(),
        }
    }
}

const SEED: u64 = 2024;
const WINDOW: &str = "Wed 15:00-15:30";

fn settings() -> AllocationSettings {
    AllocationSettings::default()
}

fn c1_formulation_size() -> Outcome {
    // Abilene plus one extra bidirectional link: n = 11, m = 30
    let base = abilene_topology();
    let (a, b) = (base.node_index("SNVA").unwrap(), base.node_index("CHIN").unwrap());
    let mut edges: Vec<Edge> = base.edges().to_vec();
    edges.push(Edge::new(a, b, ABILENE_LINK_MBPS));
    edges.push(Edge::new(b, a, ABILENE_LINK_MBPS));
    let topo = Topology::new(base.names().to_vec(), edges).unwrap();
    let (n, m) = (topo.node_count(), topo.edge_count());
    let rates = TrafficDemandMatrix::from_fn(n, |_, _| 1.0).unwrap();
    let family = realtime_utilities(&rates, 1e-3, AlphaFairness::default()).unwrap();
    let ours = build_problem(&topo, &family, AlphaFairness::default(), SolverTolerances::default())
        .unwrap()
        .size()
        .flow_vars;
    let reference = PerPairProgram::build(&topo, &vec![1.0; n * (n - 1)], 2.0, 1.0).flow_vars;
    Outcome::check(
        n == 11 && m == 30 && ours == 330 && reference == 3300 && reference == (n - 1) * ours,
        format!("n={n} m={m}: {ours} flow variables vs {reference} per-pair"),
    )
}

fn c2_small_instance_oracle() -> Outcome {
    let start = Instant::now();
    let (mut oracle_ok, mut agree_ok) = (0, 0);
    let (mut worst_dev, mut worst_gap, mut worst_bottleneck) = (0.0f64, 0.0f64, 0.0f64);
    let mut worst_recomputed = 0.0f64;
    let mut unsolved = 0;
    for seed in 0..25 {
        let (topo, rates) = random_instance(seed, 5, 12);
        let n = topo.node_count();
        let family = linear_family(n, 32.0, &rates);
        let ours = common::solve(&topo, &family, 32.0);
        let oracle = maxmin_oracle(&topo, &family).unwrap();
        let dev = ours
            .phi
            .iter()
            .zip(&oracle.utilities)
            .map(|(a, b)| (a - b).abs() / b)
            .fold(0.0, f64::max);
        worst_dev = worst_dev.max(dev);
        oracle_ok += usize::from(dev <= 0.01);

        let level = oracle.utilities.iter().cloned().fold(f64::INFINITY, f64::min);
        let bottleneck = ours
            .phi
            .iter()
            .zip(&oracle.utilities)
            .filter(|(_, &b)| b <= level * (1.0 + 1e-9))
            .map(|(a, b)| (a - b).abs() / b)
            .fold(0.0, f64::max);
        worst_bottleneck = worst_bottleneck.max(bottleneck);
        let pp = PerPairProgram::build(&topo, &rates, 32.0, level).solve();
        unsolved += usize::from(pp.status != SolverStatus::Solved);
        let gap = rel(ours.stats.solver_objective, pp.objective);
        worst_gap = worst_gap.max(gap);
        agree_ok += usize::from(gap <= 1e-5);
        let pp_obj: f64 = pp
            .demand
            .iter()
            .zip(&rates)
            .map(|(t, r)| alpha_utility(t / r, 32.0).unwrap())
            .sum();
        worst_recomputed = worst_recomputed.max(rel(ours.objective, pp_obj));
    }
    let secs = start.elapsed().as_secs_f64();
    Outcome::check(
        oracle_ok == 25 && agree_ok == 25 && secs < 60.0,
        format!(
            "alpha=32 within 1% of max-min on {oracle_ok}/25 (worst per-pair {:.2}%, worst on lowest-level \
             pairs {:.2}%); per-pair optimal objective within 1e-5 on {agree_ok}/25 (worst {worst_gap:.1e}, \
             {unsolved} reference solves not converged; recomputed from T worst {worst_recomputed:.1e}); {secs:.1} s",
            100.0 * worst_dev,
            100.0 * worst_bottleneck
        ),
    )
}

fn residuals_ok(topo: &Topology, r: &AllocationResult) -> (bool, f64, f64) {
    let rep = residual_report(topo, r).unwrap();
    let cons = rep.max_conservation / topo.max_capacity();
    (cons <= 1e-6 && rep.max_capacity_rel <= 1e-6, cons, rep.max_capacity_rel)
}

fn c3_residuals() -> Outcome {
    let mut ok = 0;
    let mut total = 0;
    let (mut worst_c, mut worst_e) = (0.0f64, 0.0f64);
    for seed in 0..40u64 {
        let alpha = [0.0, 0.5, 1.0, 2.0, 32.0][seed as usize % 5];
        let (topo, rates) = random_instance(500 + seed, 6, 16);
        let r = common::solve(&topo, &linear_family(topo.node_count(), alpha, &rates), alpha);
        let (pass, c, e) = residuals_ok(&topo, &r);
        ok += usize::from(pass);
        total += 1;
        worst_c = worst_c.max(c);
        worst_e = worst_e.max(e);
    }
    let exp = experiment();
    let (pass, c, e) = residuals_ok(&exp.topology, &exp.hist.result);
    ok += usize::from(pass);
    total += 1;
    worst_c = worst_c.max(c);
    worst_e = worst_e.max(e);
    Outcome::check(
        ok == total,
        format!(
            "{ok}/{total} solves within bounds; worst |T+FA'|/max(c) {worst_c:.1e}, worst edge total {worst_e:.1e}"
        ),
    )
}

/// Largest `|sum over paths of fraction * T - Z|` over pairs and edges.
fn path_round_trip(topo: &Topology, z: &DetailedFlowSet, demand: &TrafficDemandMatrix) -> f64 {
    let config = CircuitConfig::from_detailed(topo, z, demand).unwrap();
    let mut worst = 0.0f64;
    for (k, l) in ie_pairs(topo.node_count()) {
        let entry = config.get(k, l);
        let mut rebuilt = vec![0.0; topo.edge_count()];
        for p in &entry.paths {
            for &j in &p.edges {
                rebuilt[j] += p.fraction * entry.capacity;
            }
        }
        let want = z.pair_flows(k, l);
        for (a, b) in rebuilt.iter().zip(&want) {
            worst = worst.max((a - b).abs());
        }
    }
    worst
}

fn c4_acyclic_disaggregation() -> Outcome {
    let start = Instant::now();
    let mut failures = Vec::new();
    let mut worst = [0.0f64; 3];
    for seed in 0..50u64 {
        let (topo, rates) = random_instance(1000 + seed, 6, 16);
        let n = topo.node_count();
        let r = common::solve(&topo, &linear_family(n, 2.0, &rates), 2.0);
        let cmax = topo.max_capacity();
        let acyclic = (0..n).all(|k| {
            let row: Vec<f64> = r.flows.as_matrix().row(k).iter().copied().collect();
            find_cycle(&topo, &row, 0.0).is_none()
        });
        if !acyclic {
            failures.push(format!("seed {seed}: cycle"));
            continue;
        }
        for (name, z) in [
            ("greedy", disaggregate_greedy(&topo, &r.flows, &r.demand)),
            ("proportional", disaggregate_proportional(&topo, &r.flows, &r.demand)),
        ] {
            let z = match z {
                Ok(z) => z,
                Err(e) => {
                    failures.push(format!("seed {seed} {name}: {e}"));
                    continue;
                }
            };
            let attr = z.attribution_residual(&r.flows) / cmax;
            let cons = z.conservation_residual(&topo, &r.demand) / cmax;
            let trip = path_round_trip(&topo, &z, &r.demand) / cmax;
            for (w, v) in worst.iter_mut().zip([attr, cons, trip]) {
                *w = w.max(v);
            }
            if attr > 1e-6 || cons > 1e-6 || trip > 1e-9 {
                failures.push(format!("seed {seed} {name}: {attr:.1e} {cons:.1e} {trip:.1e}"));
            }
        }
    }
    let secs = start.elapsed().as_secs_f64();
    Outcome::check(
        failures.is_empty() && secs < 30.0,
        format!(
            "50 instances, {} failures; worst sum Z - F {:.1e}, conservation {:.1e}, path round trip {:.1e} \
             (relative to max c); {secs:.1} s{}",
            failures.len(),
            worst[0],
            worst[1],
            worst[2],
            failures.first().map(|f| format!("; first: {f}")).unwrap_or_default()
        ),
    )
}

fn pwl_invariants(p: &ConcavePwl, params: &PwlFitParams) -> bool {
    let s = p.segment_slopes();
    s.windows(2).all(|w| w[1] <= w[0] * (1.0 + 1e-9)) && s.iter().all(|&x| x >= params.min_slope * (1.0 - 1e-9))
}

fn c5_pwl_fit() -> Outcome {
    let start = Instant::now();
    let params = PwlFitParams::default();
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    let uniform = Uniform::new(0.0, 100.0);
    let triangular = Triangular::new(0.0, 100.0, 30.0).unwrap();
    let uniform_cdf = |x: f64| (x / 100.0).clamp(0.0, 1.0);
    let triangular_cdf = |x: f64| {
        if x <= 30.0 {
            x * x / (100.0 * 30.0)
        } else {
            1.0 - (100.0 - x).powi(2) / (100.0 * 70.0)
        }
    };
    let mut details = Vec::new();
    let mut pass = true;
    let cases: [(&str, Vec<f64>, &dyn Fn(f64) -> f64); 2] = [
        ("uniform", (0..10_000).map(|_| uniform.sample(&mut rng)).collect(), &uniform_cdf),
        ("triangular", (0..10_000).map(|_| triangular.sample(&mut rng)).collect(), &triangular_cdf),
    ];
    for (name, samples, truth) in cases {
        let cdf = EmpiricalCdf::new(samples).unwrap();
        let p = fit_concave_pwl(&cdf, &params).unwrap();
        let (lo, hi) = (cdf.median(), cdf.max());
        let grid = 2000;
        let sq: f64 = (0..=grid)
            .map(|i| {
                let x = lo + (hi - lo) * i as f64 / grid as f64;
                (p.eval(x) - truth(x)).powi(2)
            })
            .sum();
        let rms = (sq / (grid + 1) as f64).sqrt();
        let segments = p.segment_slopes().len();
        pass &= rms <= 0.05 && segments == 3 && pwl_invariants(&p, &params);
        details.push(format!("{name} rms {rms:.4} ({segments} segments)"));
    }
    let flat = fit_concave_pwl(&EmpiricalCdf::new(vec![42.0; 500]).unwrap(), &params).unwrap();
    let flat_ok = pwl_invariants(&flat, &params);
    pass &= flat_ok;
    details.push(format!("all-equal invariants {}", if flat_ok { "hold" } else { "broken" }));
    let secs = start.elapsed().as_secs_f64();
    pass &= secs < 10.0;
    Outcome::check(pass, format!("{}; {secs:.2} s", details.join(", ")))
}

fn c6_reroute_scenario() -> Outcome {
    let (sf, chi, ny) = (0, 1, 2);
    let caps = TrafficDemandMatrix::from_fn(3, |k, l| match (k, l) {
        (2, 0) => 8.0,
        (1, 0) => 4.0,
        (2, 1) => 4.0,
        _ => 0.0,
    })
    .unwrap();
    let circuits = CircuitConfig::from_capacities(&caps);
    let mut burst = DMatrix::zeros(3, 3);
    burst[(ny, sf)] = 10.0;
    burst[(ny, chi)] = 2.0;
    let mut details = Vec::new();
    let mut pass = true;
    for strategy in [Strategy::GreedyRR, Strategy::OptRR] {
        let mut sim = CircuitSim::new(&circuits, strategy, &SimParams::default()).unwrap();
        sim.step(&burst);
        for _ in 0..4 {
            sim.step(&DMatrix::zeros(3, 3));
        }
        let t = sim.totals();
        let two_hop = t.hop_volume - t.delivered;
        let ok = t.delivered == 12.0 && t.dropped == 0.0 && two_hop == 2.0 && t.routed == 2.0 && sim.backlog() == 0.0;
        pass &= ok;
        details.push(format!(
            "{strategy}: delivered {}, dropped {}, two-hop {}",
            t.delivered, t.dropped, t.routed
        ));
    }
    Outcome::check(pass, details.join("; "))
}

struct Experiment {
    topology: Topology,
    synthetic: SyntheticExperiment,
    test: Vec<TrafficDemandMatrix>,
    hist: circalloc::pipeline::CircuitAllocation,
    hist_secs: f64,
    rt: Vec<Result<CircuitConfig, String>>,
    s0: f64,
    setup_secs: f64,
}

fn build_experiment() -> Experiment {
    let start = Instant::now();
    let window = TimeWindow::parse(WINDOW).unwrap();
    let synthetic = abilene_experiment(SEED, &window).unwrap();
    let topology = synthetic.topology.clone();
    let t0 = Instant::now();
    let (family, _) = fit_history(
        &synthetic.series,
        &synthetic.history,
        &PwlFitParams::default(),
        settings().alpha,
    )
    .unwrap();
    let hist = allocate_circuits(&topology, &family, &settings()).unwrap();
    let hist_secs = t0.elapsed().as_secs_f64();
    let rt = realtime_plan(&topology, &synthetic.series, &synthetic.test, &settings());
    let test: Vec<_> = synthetic.test.iter().map(|&i| synthetic.series.matrices()[i].clone()).collect();
    let routing = shortest_path_tables(&topology, None).unwrap();
    let s0 = normalize_load(&topology, &routing, &test, &SimParams::default()).unwrap();
    Experiment {
        topology,
        synthetic,
        test,
        hist,
        hist_secs,
        rt,
        s0,
        setup_secs: start.elapsed().as_secs_f64(),
    }
}

fn experiment() -> &'static Experiment {
    static EXP: OnceLock<Experiment> = OnceLock::new();
    EXP.get_or_init(build_experiment)
}

fn specs(exp: &Experiment, strategies: &[Strategy], rt: bool) -> Vec<StrategySpec> {
    let mut out = vec![StrategySpec {
        label: "OSPF".into(),
        strategy: Strategy::Ospf,
        circuits: CircuitPlan::None,
    }];
    for &s in strategies {
        if rt {
            out.push(StrategySpec {
                label: format!("RT-{s}"),
                strategy: s,
                circuits: CircuitPlan::PerMatrix(exp.rt.clone()),
            });
        }
        out.push(StrategySpec {
            label: format!("HIST-{s}"),
            strategy: s,
            circuits: CircuitPlan::Fixed(exp.hist.circuits.clone()),
        });
    }
    out
}

const RR: [Strategy; 3] = [Strategy::NoRR, Strategy::GreedyRR, Strategy::OptRR];

fn c7_ordering() -> Outcome {
    let start = Instant::now();
    let exp = experiment();
    let loads = [0.67, 1.0, 1.17, 1.33, 1.5];
    let report = sweep(
        &exp.topology,
        &exp.test,
        &specs(exp, &RR, false),
        &loads,
        exp.s0,
        &SimParams::default(),
    )
    .unwrap();
    let cells = report.rows.len();
    let mut violations = Vec::new();
    let errors: usize = report.rows.iter().map(|r| r.errors.len()).sum();
    for &load in &loads {
        let get = |s: &str| report.get(s, load).unwrap();
        let (no, gr, opt) = (get("HIST-NoRR"), get("HIST-GreedyRR"), get("HIST-OptRR"));
        if !(opt.drop_rate <= gr.drop_rate && gr.drop_rate <= no.drop_rate) {
            violations.push(format!(
                "load {load}: {:.2e} / {:.2e} / {:.2e}",
                opt.drop_rate, gr.drop_rate, no.drop_rate
            ));
        }
        if no.mean_hops != 1.0 || no.router_load_mbps != 0.0 {
            violations.push(format!("load {load}: NoRR hops {} router {}", no.mean_hops, no.router_load_mbps));
        }
    }
    let ospf: Vec<f64> = loads.iter().map(|&l| report.get("OSPF", l).unwrap().mean_hops).collect();
    let ospf_flat = ospf.iter().all(|&h| h == ospf[0]);
    if !ospf_flat {
        violations.push(format!("OSPF hops vary: {ospf:?}"));
    }
    let secs = start.elapsed().as_secs_f64();
    Outcome::check(
        cells == 20 && errors == 0 && violations.is_empty() && secs < 300.0,
        format!(
            "{cells} cells, {errors} matrix errors; OptRR <= GreedyRR <= NoRR at every load {}; \
             OSPF hops {:.3} at every load {}; NoRR hops 1 and router load 0 {}; {secs:.1} s{}",
            ok_word(violations.iter().all(|v| !v.contains('/'))),
            ospf[0],
            ok_word(ospf_flat),
            ok_word(violations.iter().all(|v| !v.contains("router"))),
            violations.first().map(|v| format!("; first violation: {v}")).unwrap_or_default()
        ),
    )
}

fn ok_word(ok: bool) -> &'static str {
    if ok {
        "holds"
    } else {
        "VIOLATED"
    }
}

/// Largest multiplier of `s0` for which the matrix is routable on the physical topology.
fn physical_bound(topo: &Topology, demand: &TrafficDemandMatrix, s0: f64) -> f64 {
    let feasible = |x: f64| {
        matches!(
            check_feasible(topo, &demand.scaled(x * s0).unwrap(), 1e-6 * topo.max_capacity()).unwrap(),
            Feasibility::Feasible(_)
        )
    };
    let (mut lo, mut hi) = (0.0, 4.0);
    for _ in 0..30 {
        let mid = 0.5 * (lo + hi);
        if feasible(mid) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    lo
}

fn zero_drop_through(report: &SimulationReport, label: &str, loads: &[f64]) -> f64 {
    let mut best = 0.0;
    for &l in loads {
        match report.get(label, l) {
            Some(r) if r.errors.is_empty() && r.drop_rate <= 1e-12 => best = l,
            _ => break,
        }
    }
    best
}

fn c8_throughput() -> Outcome {
    let exp = experiment();
    let loads = [1.0, 1.1, 1.17, 1.25, 1.33, 1.5];
    let report = sweep(
        &exp.topology,
        &exp.test,
        &specs(exp, &[Strategy::OptRR], true),
        &loads,
        exp.s0,
        &SimParams::default(),
    )
    .unwrap();
    let rt = zero_drop_through(&report, "RT-OptRR", &loads);
    let hist = zero_drop_through(&report, "HIST-OptRR", &loads);
    let at = |label: &str| report.get(label, 1.33).map(|r| r.drop_rate).unwrap_or(f64::NAN);
    let bounds: Vec<f64> = exp.test.iter().map(|d| physical_bound(&exp.topology, d, exp.s0)).collect();
    let (bmin, bmax) = bounds
        .iter()
        .fold((f64::INFINITY, 0.0f64), |(a, b), &x| (a.min(x), b.max(x)));
    let mut line = format!(
        "synthetic (seed {SEED}, {WINDOW}): zero drops through {rt:.2} s0 (RT-OptRR) and {hist:.2} s0 (HIST-OptRR); \
         drop rate at 1.33 s0 {:.1e} / {:.1e}; physical routability bound {bmin:.3}-{bmax:.3} s0",
        at("RT-OptRR"),
        at("HIST-OptRR")
    );
    let mut pass = rt >= 1.33 && hist >= 1.33;
    match dataset_checks() {
        Some(Ok((ok, detail))) => {
            pass &= ok;
            line.push_str(&format!("; dataset: {detail}"));
        }
        Some(Err(e)) => {
            pass = false;
            line.push_str(&format!("; dataset: error {e}"));
        }
        None => line.push_str("; dataset checks skipped (CIRCALLOC_ABILENE_TOPOLOGY / CIRCALLOC_ABILENE_TRAFFIC unset)"),
    }
    Outcome::check(pass, line)
}

/// Checks against the public Abilene traffic matrices, when supplied.
fn dataset_checks() -> Option<Result<(bool, String), String>> {
    let topo_path = std::env::var("CIRCALLOC_ABILENE_TOPOLOGY").ok()?;
    let traffic = std::env::var("CIRCALLOC_ABILENE_TRAFFIC").ok()?;
    Some(run_dataset(&topo_path, &traffic))
}

fn run_dataset(topo_path: &str, traffic: &str) -> Result<(bool, String), String> {
    let e = |x: circalloc::Error| x.to_string();
    let scale: f64 = std::env::var("CIRCALLOC_ABILENE_SCALE")
        .ok()
        .map(|s| s.parse().map_err(|_| format!("bad CIRCALLOC_ABILENE_SCALE {s:?}")))
        .transpose()?
        .unwrap_or(1.0);
    let window = std::env::var("CIRCALLOC_ABILENE_WINDOW").unwrap_or_else(|_| WINDOW.to_string());
    let window = TimeWindow::parse(&window).map_err(e)?;
    let raw_topo = load_topology(topo_path).map_err(e)?;
    let raw = load_traffic_series(traffic, raw_topo.node_count(), scale).map_err(e)?;
    let (topo, series) = match std::env::var("CIRCALLOC_ABILENE_MERGE") {
        Ok(d) => {
            let (t, map) = merge_nodes(&raw_topo, &[MergeDirective::parse(&d).map_err(e)?]).map_err(e)?;
            (t, map.apply_series(&raw).map_err(e)?)
        }
        Err(_) => (raw_topo, raw),
    };
    let split = chrono::NaiveDate::from_ymd_opt(2004, 6, 19)
        .unwrap()
        .and_hms_opt(0, 0, 0)
        .unwrap()
        .and_utc()
        .timestamp();
    let history = series.select(Some(&window), None, Some(split));
    let test_idx = series.select(Some(&window), Some(split), None);
    if test_idx.is_empty() {
        return Err("no test snapshots on or after 2004-06-19 in the window".into());
    }
    dataset_report(&topo, &series, &history, &test_idx)
}

fn dataset_report(
    topo: &Topology,
    series: &TrafficSeries,
    history: &[usize],
    test_idx: &[usize],
) -> Result<(bool, String), String> {
    let e = |x: circalloc::Error| x.to_string();
    let (family, _) = fit_history(series, history, &PwlFitParams::default(), settings().alpha).map_err(e)?;
    let hist = allocate_circuits(topo, &family, &settings()).map_err(e)?;
    let rt = realtime_plan(topo, series, test_idx, &settings());
    let test: Vec<_> = test_idx.iter().map(|&i| series.matrices()[i].clone()).collect();
    let params = SimParams::default();
    let routing = shortest_path_tables(topo, None).map_err(e)?;
    let s0 = normalize_load(topo, &routing, &test, &params).map_err(e)?;
    let loads = [1.0, 1.17, 1.33, 1.5];
    let specs = vec![
        StrategySpec {
            label: "OSPF".into(),
            strategy: Strategy::Ospf,
            circuits: CircuitPlan::None,
        },
        StrategySpec {
            label: "RT-OptRR".into(),
            strategy: Strategy::OptRR,
            circuits: CircuitPlan::PerMatrix(rt),
        },
        StrategySpec {
            label: "HIST-NoRR".into(),
            strategy: Strategy::NoRR,
            circuits: CircuitPlan::Fixed(hist.circuits),
        },
    ];
    let report = sweep(topo, &test, &specs, &loads, s0, &params).map_err(e)?;
    let rt_through = zero_drop_through(&report, "RT-OptRR", &loads);
    let nor = report.get("HIST-NoRR", 1.0).map(|r| r.drop_rate).unwrap_or(f64::NAN);
    let hops = report.get("OSPF", 1.0).map(|r| r.mean_hops).unwrap_or(f64::NAN);
    let ok = rt_through >= 1.5 && (0.0..=0.01).contains(&nor) && (hops - 2.46).abs() <= 0.1;
    Ok((
        ok,
        format!("RT-OptRR zero drops through {rt_through:.2} s0, HIST-NoRR drop at s0 {nor:.2e}, OSPF hops {hops:.3}"),
    ))
}

fn c9_performance() -> Outcome {
    let exp = experiment();
    let start = Instant::now();
    let report = sweep(
        &exp.topology,
        &exp.test,
        &specs(exp, &RR, true),
        &DEFAULT_LOADS,
        exp.s0,
        &SimParams::default(),
    )
    .unwrap();
    let sweep_secs = start.elapsed().as_secs_f64() + exp.setup_secs;
    let pairs = exp.synthetic.series.node_count() * (exp.synthetic.series.node_count() - 1);
    Outcome::check(
        exp.hist_secs < 10.0 && sweep_secs < 900.0,
        format!(
            "history allocation (n=11, {pairs} PWL utilities, 3 segments) {:.2} s; full default sweep \
             ({} strategies x {} loads x {} matrices, including setup) {sweep_secs:.1} s",
            exp.hist_secs,
            report.strategies().len(),
            DEFAULT_LOADS.len(),
            exp.test.len()
        ),
    )
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 9] = [
        ("formulation size", c1_formulation_size),
        ("small-instance oracle", c2_small_instance_oracle),
        ("residuals", c3_residuals),
        ("acyclicity and disaggregation", c4_acyclic_disaggregation),
        ("PWL fitting", c5_pwl_fit),
        ("re-route scenario", c6_reroute_scenario),
        ("simulator ordering", c7_ordering),
        ("throughput", c8_throughput),
        ("performance", c9_performance),
    ];
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let id = (i + 1).to_string();
        if !filter.is_empty() && !filter.iter().any(|f| *f == id || name.contains(f.as_str())) {
            continue;
        }
        let outcome = catch_unwind(AssertUnwindSafe(run)).unwrap_or_else(|p| {
            let msg = p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Outcome::check(false, format!("panicked: {msg}"))
        });
        let tag = match outcome.verdict {
            Verdict::Pass => "PASS",
            Verdict::Fail => {
                failed += 1;
                "FAIL"
            }
        };
        println!("acceptance {id} {tag} {name}: {}", outcome.detail);
    }
    if failed > 0 {
        println!("acceptance: {failed} criteria failed");
        std::process::exit(1);
    }
}
