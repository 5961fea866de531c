#![allow(dead_code)]

use circalloc::alloc::{build_problem, AllocationResult, SolverTolerances};
use circalloc::net::{ie_pairs, Edge, Topology};
use circalloc::utility::{AlphaFairness, LinearUtility, PairUtility, UtilityFamily};
use clarabel::algebra::CscMatrix;
use clarabel::solver::{DefaultSettings, DefaultSolver, IPSolver, SolverStatus, SupportedConeT};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub fn names(n: usize) -> Vec<String> {
    (0..n).map(|i| format!("v{i}")).collect()
}

/// Random strongly connected digraph: a directed ring plus random chords.
pub fn random_topology(rng: &mut ChaCha8Rng, n: usize, m: usize) -> Topology {
    assert!(m >= n && m <= n * (n - 1));
    let mut edges: Vec<Edge> = (0..n).map(|i| Edge::new(i, (i + 1) % n, rng.gen_range(1.0..10.0))).collect();
    while edges.len() < m {
        let (a, b) = (rng.gen_range(0..n), rng.gen_range(0..n));
        if a != b && !edges.iter().any(|e| e.tail == a && e.head == b) {
            edges.push(Edge::new(a, b, rng.gen_range(1.0..10.0)));
        }
    }
    Topology::new(names(n), edges).unwrap()
}

pub fn random_instance(seed: u64, max_nodes: usize, max_edges: usize) -> (Topology, Vec<f64>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.gen_range(3..=max_nodes);
    let m = rng.gen_range(n..=max_edges.min(n * (n - 1)));
    let topo = random_topology(&mut rng, n, m);
    let rates = ie_pairs(n).map(|_| rng.gen_range(0.5..4.0)).collect();
    (topo, rates)
}

pub fn linear_family(n: usize, alpha: f64, rates: &[f64]) -> UtilityFamily {
    let us = rates
        .iter()
        .map(|&r| PairUtility::Linear(LinearUtility::new(r).unwrap()))
        .collect();
    UtilityFamily::new(n, AlphaFairness::new(alpha).unwrap(), us).unwrap()
}

pub fn solve(topo: &Topology, family: &UtilityFamily, alpha: f64) -> AllocationResult {
    build_problem(topo, family, AlphaFairness::new(alpha).unwrap(), SolverTolerances::default())
        .unwrap()
        .solve()
        .unwrap()
}

/// Per-pair multicommodity formulation: one flow variable per (pair, edge),
/// pair-wise conservation, shared capacities, and the alpha-fair objective on
/// `T / (r * scale)`. Only linear utilities with `alpha > 1` are supported.
pub struct PerPairProgram {
    pub n: usize,
    pub m: usize,
    pub flow_vars: usize,
    pub nvars: usize,
    alpha: f64,
    scale: f64,
    cmax: f64,
    a: CscMatrix<f64>,
    b: Vec<f64>,
    q: Vec<f64>,
    cones: Vec<SupportedConeT<f64>>,
}

pub struct PerPairSolution {
    pub status: SolverStatus,
    /// Allocated `T` per pair, pair order.
    pub demand: Vec<f64>,
    /// Optimal `sum U(T / r)` in original units.
    pub objective: f64,
}

impl PerPairProgram {
    pub fn build(topo: &Topology, rates: &[f64], alpha: f64, scale: f64) -> Self {
        assert!(alpha > 1.0);
        let (n, m) = (topo.node_count(), topo.edge_count());
        let npairs = n * (n - 1);
        let cmax = topo.max_capacity();
        let flow_vars = npairs * m;
        let t = |p: usize| flow_vars + p;
        let w = |p: usize| flow_vars + npairs + p;
        let nvars = flow_vars + 2 * npairs;

        // rows as (terms of A, b); A x + s = b
        let mut zero = Vec::new();
        for (p, (k, l)) in ie_pairs(n).enumerate() {
            for i in (0..n).filter(|&i| i != k) {
                // outflow - inflow - [i == l] T = 0
                let mut row: Vec<(usize, f64)> = Vec::new();
                for &j in topo.out_edges(i) {
                    row.push((p * m + j, 1.0));
                }
                for &j in topo.in_edges(i) {
                    row.push((p * m + j, -1.0));
                }
                if i == l {
                    row.push((t(p), -1.0));
                }
                zero.push((row, 0.0));
            }
        }
        for (j, e) in topo.edges().iter().enumerate() {
            let row = (0..npairs).map(|p| (p * m + j, 1.0)).collect();
            zero.push((row, e.capacity / cmax));
        }
        let mut nonneg = Vec::new();
        for v in 0..flow_vars + npairs {
            nonneg.push((vec![(v, -1.0)], 0.0));
        }
        // (w, T cmax / (r scale), 1) in the power cone with exponent 1/alpha
        let mut power = Vec::new();
        for p in 0..npairs {
            power.push((vec![(w(p), -1.0)], 0.0));
            power.push((vec![(t(p), -cmax / (rates[p] * scale))], 0.0));
            power.push((vec![], 1.0));
        }
        let mut cones = vec![
            SupportedConeT::ZeroConeT(zero.len()),
            SupportedConeT::NonnegativeConeT(nonneg.len()),
        ];
        cones.extend((0..npairs).map(|_| SupportedConeT::PowerConeT(1.0 / alpha)));

        let (mut ri, mut ci, mut vals, mut b) = (Vec::new(), Vec::new(), Vec::new(), Vec::new());
        for (r, (row, rhs)) in zero.iter().chain(&nonneg).chain(&power).enumerate() {
            for &(v, c) in row {
                ri.push(r);
                ci.push(v);
                vals.push(c);
            }
            b.push(*rhs);
        }
        let a = CscMatrix::new_from_triplets(b.len(), nvars, ri, ci, vals);
        let mut q = vec![0.0; nvars];
        for p in 0..npairs {
            q[w(p)] = 1.0 / (alpha - 1.0);
        }
        PerPairProgram {
            n,
            m,
            flow_vars,
            nvars,
            alpha,
            scale,
            cmax,
            a,
            b,
            q,
            cones,
        }
    }

    pub fn solve(&self) -> PerPairSolution {
        let settings = DefaultSettings {
            verbose: false,
            max_iter: 400,
            tol_feas: 1e-8,
            tol_gap_abs: 1e-8,
            tol_gap_rel: 1e-8,
            max_step_fraction: 0.9,
            ..DefaultSettings::default()
        };
        let p = CscMatrix::zeros((self.nvars, self.nvars));
        let mut solver = DefaultSolver::new(&p, &self.q, &self.a, &self.b, &self.cones, settings).unwrap();
        solver.solve();
        let npairs = self.n * (self.n - 1);
        let x = &solver.solution.x;
        PerPairSolution {
            status: solver.solution.status,
            demand: (0..npairs).map(|p| x[self.flow_vars + p].max(0.0) * self.cmax).collect(),
            objective: -solver.solution.obj_val * self.scale.powf(1.0 - self.alpha),
        }
    }
}

pub fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(f64::MIN_POSITIVE)
}
