use nalgebra::DMatrix;
use proptest::prelude::{prop_assert, prop_oneof, proptest, Just, ProptestConfig};
use proptest::strategy::Strategy as Gen;

use super::*;
use crate::net::{ie_pairs, Topology};

const SF: usize = 0;
const CHI: usize = 1;
const NY: usize = 2;

fn burst_circuits() -> CircuitConfig {
    let t = TrafficDemandMatrix::from_fn(3, |k, l| match (k, l) {
        (NY, SF) => 8.0,
        (CHI, SF) => 4.0,
        (NY, CHI) => 4.0,
        _ => 0.0,
    })
    .unwrap();
    CircuitConfig::from_capacities(&t)
}

fn arrivals(entries: &[(usize, usize, f64)]) -> DMatrix<f64> {
    let mut a = DMatrix::zeros(3, 3);
    for &(dest, src, v) in entries {
        a[(dest, src)] = v;
    }
    a
}

fn triangle() -> Topology {
    let names = vec!["SF".into(), "CHI".into(), "NY".into()];
    Topology::bidirectional(names, &[(0, 1, 10.0), (1, 2, 10.0), (0, 2, 10.0)]).unwrap()
}

fn burst_rates() -> TrafficDemandMatrix {
    TrafficDemandMatrix::from_fn(3, |k, l| match (k, l) {
        (NY, SF) => 10.0,
        (NY, CHI) => 2.0,
        _ => 0.0,
    })
    .unwrap()
}

#[test]
fn burst_spills_exactly_two_units_over_two_hops() {
    for strategy in [Strategy::GreedyRR, Strategy::OptRR] {
        let mut sim = CircuitSim::new(&burst_circuits(), strategy, &SimParams::default()).unwrap();
        sim.step(&arrivals(&[(NY, SF, 10.0), (NY, CHI, 2.0)]));
        assert_eq!(sim.queued(CHI, NY), 2.0, "{strategy}");
        assert_eq!(sim.queued(SF, NY), 0.0, "{strategy}");
        sim.step(&arrivals(&[(NY, CHI, 2.0)]));
        for _ in 0..3 {
            sim.step(&arrivals(&[]));
        }
        let t = sim.totals();
        assert_eq!(t.dropped, 0.0, "{strategy}");
        assert_eq!(t.delivered, 14.0, "{strategy}");
        assert_eq!(t.hop_volume - t.delivered, 2.0, "{strategy}");
        assert_eq!(t.routed, 2.0, "{strategy}");
        assert_eq!(t.router, 2.0, "{strategy}");
        assert_eq!(sim.backlog(), 0.0);
    }
}

#[test]
fn burst_without_rerouting_waits_for_the_direct_circuit() {
    let mut sim = CircuitSim::new(&burst_circuits(), Strategy::NoRR, &SimParams::default()).unwrap();
    sim.step(&arrivals(&[(NY, SF, 10.0), (NY, CHI, 2.0)]));
    assert_eq!(sim.queued(SF, NY), 2.0);
    sim.step(&arrivals(&[]));
    let t = sim.totals();
    assert_eq!((t.delivered, t.hop_volume, t.routed, t.router), (12.0, 12.0, 0.0, 0.0));
}

#[test]
fn steady_burst_metrics() {
    let topo = triangle();
    let circuits = burst_circuits();
    let rates = burst_rates();
    let run = |strategy| {
        simulate(&Scenario {
            topology: &topo,
            strategy,
            circuits: Some(&circuits),
            routing: None,
            rates: &rates,
            multiplier: 1.0,
            params: SimParams::default(),
        })
        .unwrap()
    };
    for s in [Strategy::GreedyRR, Strategy::OptRR] {
        let m = run(s);
        assert_eq!(m.drop_rate, 0.0, "{s}");
        assert!((m.mean_hops - 14.0 / 12.0).abs() < 1e-12, "{s}");
        assert!((m.frac_routed - 2.0 / 12.0).abs() < 1e-12, "{s}");
        assert!((m.router_load_mbps - 2.0 / 3.0).abs() < 1e-12, "{s}");
        assert!(!m.saturated);
    }
    let m = run(Strategy::NoRR);
    assert!((m.drop_rate - 2.0 / 12.0).abs() < 1e-12);
    assert_eq!((m.mean_hops, m.frac_routed, m.router_load_mbps), (1.0, 0.0, 0.0));
    assert!(m.saturated);
}

#[test]
fn circuit_strategies_need_circuits() {
    let topo = triangle();
    let rates = burst_rates();
    let err = simulate(&Scenario {
        topology: &topo,
        strategy: Strategy::OptRR,
        circuits: None,
        routing: None,
        rates: &rates,
        multiplier: 1.0,
        params: SimParams::default(),
    })
    .unwrap_err();
    assert!(err.is_validation());
}

fn two_nodes() -> Topology {
    Topology::bidirectional(vec!["a".into(), "b".into()], &[(0, 1, 10.0)]).unwrap()
}

fn ospf_run(topo: &Topology, rates: &TrafficDemandMatrix, multiplier: f64) -> SimMetrics {
    simulate(&Scenario {
        topology: topo,
        strategy: Strategy::Ospf,
        circuits: None,
        routing: None,
        rates,
        multiplier,
        params: SimParams::default(),
    })
    .unwrap()
}

#[test]
fn ospf_saturation_point_of_a_single_link() {
    let topo = two_nodes();
    let rates = TrafficDemandMatrix::from_fn(2, |k, _| if k == 1 { 5.0 } else { 0.0 }).unwrap();
    let routing = shortest_path_tables(&topo, None).unwrap();
    let s0 = normalize_load(&topo, &routing, &[rates.clone()], &SimParams::default()).unwrap();
    assert!((2.0..=2.0 * 1.001).contains(&s0), "{s0}");
    assert_eq!(ospf_run(&topo, &rates, 0.99 * s0).drop_rate, 0.0);
    assert!(ospf_run(&topo, &rates, 1.1 * s0).drop_rate > 0.0);
}

#[test]
fn ospf_hops_do_not_depend_on_load() {
    let names = (0..4).map(|i| format!("n{i}")).collect();
    let topo = Topology::bidirectional(names, &[(0, 1, 10.0), (1, 2, 10.0), (2, 3, 10.0)]).unwrap();
    let rates = TrafficDemandMatrix::from_fn(4, |k, l| 1.0 + (k * 4 + l) as f64).unwrap();
    let a = ospf_run(&topo, &rates, 0.1);
    let b = ospf_run(&topo, &rates, 5.0);
    assert!(b.drop_rate > 0.0);
    assert_eq!(a.mean_hops, b.mean_hops);
    let expected: f64 = ie_pairs(4).map(|(k, l)| rates.get(k, l) * k.abs_diff(l) as f64).sum::<f64>() / rates.total();
    assert!((a.mean_hops - expected).abs() < 1e-12);
    assert_eq!(a.frac_routed, 1.0);
}

#[test]
fn ospf_router_load_counts_every_forwarding_node() {
    let names = (0..3).map(|i| format!("n{i}")).collect();
    let topo = Topology::bidirectional(names, &[(0, 1, 10.0), (1, 2, 10.0)]).unwrap();
    let rates = TrafficDemandMatrix::from_fn(3, |k, l| if (k, l) == (2, 0) { 3.0 } else { 0.0 }).unwrap();
    let m = ospf_run(&topo, &rates, 1.0);
    // two forwarding nodes, three routers
    assert!((m.router_load_mbps - 2.0 * 3.0 / 3.0).abs() < 1e-12);
}

#[test]
fn zero_capacity_circuit_drops_everything_without_rerouting() {
    let topo = two_nodes();
    let circuits = CircuitConfig::from_capacities(&TrafficDemandMatrix::zeros(2));
    let rates = TrafficDemandMatrix::from_fn(2, |_, _| 1.0).unwrap();
    let m = simulate(&Scenario {
        topology: &topo,
        strategy: Strategy::GreedyRR,
        circuits: Some(&circuits),
        routing: None,
        rates: &rates,
        multiplier: 1.0,
        params: SimParams::default(),
    })
    .unwrap();
    assert!((m.drop_rate - 1.0).abs() < 1e-9);
}

#[test]
fn trace_covers_every_slot() {
    let topo = triangle();
    let circuits = burst_circuits();
    let rates = burst_rates();
    let params = SimParams {
        trace: true,
        measure_secs: 10.0,
        ..SimParams::default()
    };
    let m = simulate(&Scenario {
        topology: &topo,
        strategy: Strategy::GreedyRR,
        circuits: Some(&circuits),
        routing: None,
        rates: &rates,
        multiplier: 1.0,
        params,
    })
    .unwrap();
    assert_eq!(m.trace.len(), m.warmup_slots + 10);
    assert_eq!(m.trace.iter().filter(|r| r.measuring).count(), 10);
    let csv = write_trace_csv(&m.trace);
    assert_eq!(csv.lines().count(), m.trace.len() + 1);
}

#[test]
fn strategy_names_round_trip() {
    for s in [Strategy::Ospf, Strategy::NoRR, Strategy::GreedyRR, Strategy::OptRR] {
        assert_eq!(s.name().parse::<Strategy>().unwrap(), s);
    }
    assert!("bogus".parse::<Strategy>().is_err());
}

#[test]
fn report_csv_round_trip() {
    let report = SimulationReport {
        rows: vec![
            SweepRow {
                strategy: "RT-OptRR".into(),
                load: 1.17,
                drop_rate: 0.01,
                mean_hops: 1.2,
                router_load_mbps: 33.5,
                frac_routed: 0.1,
                errors: vec![],
            },
            SweepRow {
                strategy: "HIST-NoRR".into(),
                load: 0.33,
                drop_rate: 0.0,
                mean_hops: 1.0,
                router_load_mbps: 0.0,
                frac_routed: 0.0,
                errors: vec!["matrix 2: solver failed".into()],
            },
        ],
    };
    let parsed = SimulationReport::parse_csv(&report.to_csv(), "r.csv").unwrap();
    assert_eq!(parsed, report);
    assert!(SimulationReport::parse_csv("nope\n", "r.csv").is_err());
}

#[test]
fn sweep_records_missing_circuits_per_cell() {
    let topo = triangle();
    let rates = burst_rates();
    let specs = vec![
        StrategySpec {
            label: "OSPF".into(),
            strategy: Strategy::Ospf,
            circuits: CircuitPlan::None,
        },
        StrategySpec {
            label: "RT-GreedyRR".into(),
            strategy: Strategy::GreedyRR,
            circuits: CircuitPlan::PerMatrix(vec![Ok(burst_circuits()), Err("allocation failed".into())]),
        },
    ];
    let params = SimParams {
        measure_secs: 20.0,
        ..SimParams::default()
    };
    let report = sweep(&topo, &[rates.clone(), rates], &specs, &[0.5, 1.0], 1.0, &params).unwrap();
    assert_eq!(report.rows.len(), 4);
    let row = report.get("RT-GreedyRR", 1.0).unwrap();
    assert_eq!(row.errors, vec!["matrix 2: allocation failed".to_string()]);
    assert_eq!(row.drop_rate, 0.0);
    assert!(report.get("OSPF", 0.5).unwrap().errors.is_empty());
    assert_eq!(report.strategies(), vec!["OSPF", "RT-GreedyRR"]);
}

fn random_case() -> impl Gen<Value = (Vec<f64>, Vec<f64>, usize, f64)> {
    (
        proptest::collection::vec(0.0..10.0f64, 12),
        proptest::collection::vec(0.0..8.0f64, 12),
        0usize..4,
        0.1..3.0f64,
    )
}

fn matrix4(v: &[f64]) -> TrafficDemandMatrix {
    let mut it = v.iter();
    TrafficDemandMatrix::from_fn(4, |_, _| *it.next().unwrap()).unwrap()
}

fn ring4() -> Topology {
    let names = (0..4).map(|i| format!("n{i}")).collect();
    Topology::bidirectional(names, &[(0, 1, 6.0), (1, 2, 9.0), (2, 3, 4.0), (3, 0, 7.0)]).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn volume_is_conserved((caps, rates, which, mult) in random_case()) {
        let topo = ring4();
        let circuits = CircuitConfig::from_capacities(&matrix4(&caps));
        let rates = matrix4(&rates);
        let strategy = [Strategy::Ospf, Strategy::NoRR, Strategy::GreedyRR, Strategy::OptRR][which];
        let params = SimParams { measure_secs: 40.0, warmup_max_slots: 40, ..SimParams::default() };
        let m = simulate(&Scenario {
            topology: &topo,
            strategy,
            circuits: Some(&circuits),
            routing: None,
            rates: &rates,
            multiplier: mult,
            params,
        }).unwrap();
        let scale = m.lifetime.offered.max(1.0);
        prop_assert!(m.conservation_gap().abs() <= 1e-9 * scale, "gap {}", m.conservation_gap());
        prop_assert!((0.0..=1.0 + 1e-12).contains(&m.drop_rate));
        prop_assert!((0.0..=1.0 + 1e-12).contains(&m.frac_routed));
        if strategy != Strategy::Ospf && m.measured.delivered > 0.0 {
            prop_assert!(m.mean_hops >= 1.0 - 1e-12 && m.mean_hops <= 3.0 + 1e-12);
        }
    }

    #[test]
    fn norr_drops_grow_with_load((caps, rates, _w, mult) in random_case()) {
        let topo = ring4();
        let circuits = CircuitConfig::from_capacities(&matrix4(&caps));
        let rates = matrix4(&rates);
        let params = SimParams { measure_secs: 30.0, ..SimParams::default() };
        let run = |multiplier| simulate(&Scenario {
            topology: &topo,
            strategy: Strategy::NoRR,
            circuits: Some(&circuits),
            routing: None,
            rates: &rates,
            multiplier,
            params: params.clone(),
        }).unwrap().drop_rate;
        prop_assert!(run(mult) <= run(mult * 1.5) + 1e-12);
    }
}

fn logical_mesh(caps: &TrafficDemandMatrix) -> Option<Topology> {
    let n = caps.n();
    let edges = ie_pairs(n)
        .filter(|&(k, l)| caps.get(k, l) > 0.0)
        .map(|(k, l)| crate::net::Edge::new(l, k, caps.get(k, l)))
        .collect();
    Topology::new((0..n).map(|i| format!("n{i}")).collect(), edges).ok()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn backpressure_carries_every_routable_matrix_on_three_nodes(
        caps in proptest::collection::vec(prop_oneof![1 => Just(0.0), 3 => 0.5..8.0f64], 6),
        rates in proptest::collection::vec(prop_oneof![1 => Just(0.0), 1 => 0.0..6.0f64], 6),
    ) {
        let n = 3;
        let mut ci = caps.iter();
        let caps = TrafficDemandMatrix::from_fn(n, |_, _| *ci.next().unwrap()).unwrap();
        let Some(mesh) = logical_mesh(&caps) else { return Ok(()); };
        let mut ri = rates.iter();
        let mut offered = TrafficDemandMatrix::from_fn(n, |_, _| *ri.next().unwrap()).unwrap();
        let mut feasible = false;
        for _ in 0..8 {
            if crate::net::check_feasible(&mesh, &offered, 1e-9).unwrap().is_feasible() {
                feasible = true;
                break;
            }
            offered = offered.scaled(0.5).unwrap();
        }
        if !feasible {
            return Ok(());
        }
        let circuits = CircuitConfig::from_capacities(&caps);
        let m = simulate(&Scenario {
            topology: &mesh,
            strategy: Strategy::OptRR,
            circuits: Some(&circuits),
            routing: None,
            rates: &offered,
            multiplier: 1.0,
            params: SimParams::default(),
        }).unwrap();
        prop_assert!(m.measured.dropped <= 1e-9 * m.measured.offered, "drop rate {}", m.drop_rate);
    }
}

// Relays serve queued transit on their direct circuit before their own
// re-routes, so a relay chosen by one source can starve another source that
// depends on the same circuit. Routable, yet OptRR drops.
#[test]
fn relay_contention_on_four_nodes() {
    let caps = TrafficDemandMatrix::from_fn(4, |k, l| match (l, k) {
        (0, 1) => 7.85,
        (0, 3) => 5.51,
        (1, 0) => 4.97,
        (1, 2) => 4.23,
        (2, 0) => 0.5,
        (2, 1) => 3.59,
        (2, 3) => 2.48,
        (3, 0) => 0.5,
        (3, 2) => 2.53,
        _ => 0.0,
    })
    .unwrap();
    let offered = TrafficDemandMatrix::from_fn(4, |k, l| match (l, k) {
        (0, 2) => 1.389,
        (1, 2) => 1.13,
        (3, 0) => 0.865,
        (3, 1) => 1.32,
        (3, 2) => 0.472,
        _ => 0.0,
    })
    .unwrap();
    let mesh = logical_mesh(&caps).unwrap();
    assert!(crate::net::check_feasible(&mesh, &offered, 1e-9).unwrap().is_feasible());
    let circuits = CircuitConfig::from_capacities(&caps);
    let m = simulate(&Scenario {
        topology: &mesh,
        strategy: Strategy::OptRR,
        circuits: Some(&circuits),
        routing: None,
        rates: &offered,
        multiplier: 1.0,
        params: SimParams::default(),
    })
    .unwrap();
    assert!(m.drop_rate > 0.01, "{}", m.drop_rate);
}
