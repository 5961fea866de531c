//! The alpha-fair allocation program over the destination-based flow polytope.

mod cycles;
mod io;
mod oracle;

pub use cycles::{cancel_cycles, find_cycle};
pub use io::{parse_flows, write_flows, write_summary_csv};
pub use oracle::{maxmin_oracle, MaxMinAllocation, ORACLE_MAX_NODES};

use nalgebra::DMatrix;

use crate::conic::{Affine, ConicBuilder, Tolerances};
use crate::error::{Error, Result};
use crate::net::{
    build_incidence, check_feasible, ie_pairs, DestinationFlowMatrix, Feasibility, IncidenceMatrix, Topology,
    TrafficDemandMatrix,
};
use crate::utility::{alpha_utility, AlphaFairness, PairUtility, UtilityFamily};
use clarabel::solver::SolverStatus;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverTolerances {
    /// Relative feasibility tolerance (scaled by the largest capacity).
    pub feasibility: f64,
    /// Relative duality gap.
    pub optimality: f64,
    pub max_iter: u32,
}

impl Default for SolverTolerances {
    fn default() -> Self {
        SolverTolerances {
            feasibility: 1e-6,
            optimality: 1e-6,
            max_iter: 200,
        }
    }
}

/// Variable and constraint counts of an assembled problem.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ProblemSize {
    pub flow_vars: usize,
    pub demand_vars: usize,
    pub epigraph_vars: usize,
    pub epigraph_inequalities: usize,
}

#[derive(Debug, Clone)]
pub struct AllocationProblem {
    topology: Topology,
    incidence: IncidenceMatrix,
    utilities: UtilityFamily,
    alpha: AlphaFairness,
    tolerances: SolverTolerances,
}

pub fn build_problem(
    topology: &Topology,
    utilities: &UtilityFamily,
    alpha: AlphaFairness,
    tolerances: SolverTolerances,
) -> Result<AllocationProblem> {
    let n = topology.node_count();
    if utilities.node_count() != n {
        return Err(Error::invalid(format!(
            "utilities cover {} nodes but the topology has {n}",
            utilities.node_count()
        )));
    }
    if !(tolerances.feasibility > 0.0 && tolerances.optimality > 0.0 && tolerances.max_iter > 0) {
        return Err(Error::invalid("solver tolerances must be positive"));
    }
    Ok(AllocationProblem {
        topology: topology.clone(),
        incidence: build_incidence(topology),
        utilities: utilities.clone().with_alpha(alpha),
        alpha,
        tolerances,
    })
}

impl AllocationProblem {
    pub fn topology(&self) -> &Topology {
        &self.topology
    }

    pub fn incidence(&self) -> &IncidenceMatrix {
        &self.incidence
    }

    pub fn utilities(&self) -> &UtilityFamily {
        &self.utilities
    }

    pub fn alpha(&self) -> AlphaFairness {
        self.alpha
    }

    pub fn tolerances(&self) -> SolverTolerances {
        self.tolerances
    }

    pub fn size(&self) -> ProblemSize {
        let n = self.topology.node_count();
        let mut size = ProblemSize {
            flow_vars: n * self.topology.edge_count(),
            demand_vars: n * (n - 1),
            epigraph_vars: 0,
            epigraph_inequalities: 0,
        };
        for (_, u) in self.utilities.iter() {
            if let PairUtility::Pwl(p) = u {
                size.epigraph_vars += 1;
                size.epigraph_inequalities += p.pieces().len();
            }
        }
        size
    }

    pub fn solve(&self) -> Result<AllocationResult> {
        solve(self)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum SolveStatus {
    Solved,
    /// Converged to reduced accuracy.
    AlmostSolved,
    Failed(String),
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct SolveStats {
    pub iterations: u32,
    pub solve_time_secs: f64,
    /// Objective reported by the solver, in original units.
    pub solver_objective: f64,
    pub cycles_cancelled: usize,
}

#[derive(Debug, Clone)]
pub struct AllocationResult {
    pub demand: TrafficDemandMatrix,
    pub flows: DestinationFlowMatrix,
    /// `sum U(phi(T*))` recomputed from `demand`.
    pub objective: f64,
    /// `phi` per pair, in pair order.
    pub phi: Vec<f64>,
    /// `U(phi)` per pair, in pair order.
    pub utility: Vec<f64>,
    pub status: SolveStatus,
    pub stats: SolveStats,
}

/// Smallest demand per pair at which every PWL piece reaches the floor.
fn pwl_minimum_demands(utilities: &UtilityFamily) -> Result<TrafficDemandMatrix> {
    let n = utilities.node_count();
    TrafficDemandMatrix::from_fn(n, |k, l| match utilities.get(k, l) {
        PairUtility::Pwl(p) => p
            .pieces()
            .iter()
            .map(|&(a, b)| ((p.floor() - b) / a).max(0.0))
            .fold(0.0, f64::max),
        PairUtility::Linear(_) => 0.0,
    })
}

/// Max-min level of `T / r` over linear utilities, used to scale the objective.
fn linear_level(problem: &AllocationProblem, cmax: f64) -> Option<f64> {
    let topo = &problem.topology;
    let (n, m) = (topo.node_count(), topo.edge_count());
    let npairs = n * (n - 1);
    let t_var = n * m + npairs;
    let mut prog = ConicBuilder::new(t_var + 1);
    prog.minimize(t_var, -1.0);
    add_flow_constraints(&mut prog, problem, false);
    for (p, (_, u)) in problem.utilities.iter().enumerate() {
        let PairUtility::Linear(lin) = u else { return None };
        prog.nonneg(Affine::var(n * m + p, cmax / lin.rate()).plus(t_var, -1.0));
    }
    let sol = prog
        .solve(Tolerances {
            feas: 1e-8,
            gap: 1e-8,
            max_iter: problem.tolerances.max_iter,
        })
        .ok()?;
    let level = sol.x[t_var];
    (sol.solved() && level.is_finite() && level > 0.0).then_some(level)
}

/// Conservation, capacity and sign constraints on the scaled `F` and `T` variables.
fn add_flow_constraints(prog: &mut ConicBuilder, problem: &AllocationProblem, equality: bool) {
    let topo = &problem.topology;
    let (n, m) = (topo.node_count(), topo.edge_count());
    let cmax = topo.max_capacity();
    let f = |k: usize, j: usize| k * m + j;
    for (p, (k, i)) in ie_pairs(n).enumerate() {
        // T_ki + sum_j A_ij F_kj = 0
        let mut expr = Affine::var(n * m + p, 1.0);
        for &j in topo.out_edges(i) {
            expr = expr.plus(f(k, j), -1.0);
        }
        for &j in topo.in_edges(i) {
            expr = expr.plus(f(k, j), 1.0);
        }
        prog.zero(expr);
    }
    for (j, e) in topo.edges().iter().enumerate() {
        let mut expr = Affine::constant(e.capacity / cmax);
        for k in 0..n {
            expr = expr.plus(f(k, j), -1.0);
        }
        if equality {
            prog.zero(expr);
        } else {
            prog.nonneg(expr);
        }
    }
    for v in 0..n * m + n * (n - 1) {
        prog.nonneg(Affine::var(v, 1.0));
    }
}

pub fn solve(problem: &AllocationProblem) -> Result<AllocationResult> {
    let topo = &problem.topology;
    let (n, m) = (topo.node_count(), topo.edge_count());
    let npairs = n * (n - 1);
    let cmax = topo.max_capacity();
    let alpha = problem.alpha.value();
    let utilities = &problem.utilities;

    let all_linear = utilities.iter().all(|(_, u)| matches!(u, PairUtility::Linear(_)));
    if alpha > 0.0 && !all_linear {
        let tmin = pwl_minimum_demands(utilities)?;
        if tmin.total() > 0.0 {
            if let Feasibility::Infeasible(_) = check_feasible(topo, &tmin, 1e-6 * cmax)? {
                return Err(Error::invalid(
                    "the PWL utilities fall below their floor at every routable allocation; \
                     no allocation gives every pair a positive utility",
                ));
            }
        }
    }
    let rho = if all_linear {
        linear_level(problem, cmax).unwrap_or(1.0)
    } else {
        1.0
    };

    // variables: F (n m), T (npairs), s per PWL pair, w per pair when alpha > 0
    let mut nvars = n * m + npairs;
    let mut s_var = vec![usize::MAX; npairs];
    for (p, (_, u)) in utilities.iter().enumerate() {
        if matches!(u, PairUtility::Pwl(_)) {
            s_var[p] = nvars;
            nvars += 1;
        }
    }
    let w0 = nvars;
    if alpha > 0.0 {
        nvars += npairs;
    }
    let mut prog = ConicBuilder::new(nvars);
    add_flow_constraints(&mut prog, problem, true);

    let mut args = Vec::with_capacity(npairs);
    for (p, (_, u)) in utilities.iter().enumerate() {
        let t = n * m + p;
        let arg = match u {
            PairUtility::Linear(lin) => Affine::var(t, cmax / (rho * lin.rate())),
            PairUtility::Pwl(pwl) => {
                let s = s_var[p];
                for (a, b) in pwl.pieces() {
                    // s <= a T + b
                    prog.nonneg(Affine::var(t, a * cmax).plus(s, -1.0).offset(b));
                }
                if alpha > 0.0 {
                    prog.nonneg(Affine::var(s, 1.0).offset(-pwl.floor()));
                }
                Affine::var(s, 1.0 / rho)
            }
        };
        args.push(arg);
    }
    for (p, arg) in args.into_iter().enumerate() {
        let w = w0 + p;
        if alpha == 0.0 {
            for &(v, c) in &arg.terms {
                prog.minimize(v, -c);
            }
        } else if alpha < 1.0 {
            prog.power(arg, Affine::constant(1.0), Affine::var(w, 1.0), 1.0 - alpha);
            prog.minimize(w, -1.0 / (1.0 - alpha));
        } else if alpha == 1.0 {
            prog.exp(Affine::var(w, 1.0), Affine::constant(1.0), arg);
            prog.minimize(w, -1.0);
        } else {
            prog.power(Affine::var(w, 1.0), arg, Affine::constant(1.0), 1.0 / alpha);
            prog.minimize(w, 1.0 / (alpha - 1.0));
        }
    }

    let tol = problem.tolerances;
    let sol = prog
        .solve(Tolerances {
            feas: (tol.feasibility * 1e-2).min(1e-8),
            gap: (tol.optimality * 1e-2).min(1e-8),
            max_iter: tol.max_iter,
        })
        .map_err(Error::Solver)?;
    let status = match sol.status {
        SolverStatus::Solved => SolveStatus::Solved,
        SolverStatus::AlmostSolved => SolveStatus::AlmostSolved,
        other => {
            return Err(Error::Solver(format!(
                "status {other:?} after {} iterations ({:.3} s)",
                sol.iterations, sol.solve_time
            )))
        }
    };

    let scaled_objective = -sol.objective;
    let solver_objective = if alpha == 1.0 {
        scaled_objective + npairs as f64 * rho.ln()
    } else {
        scaled_objective * rho.powf(1.0 - alpha)
    };

    // post-processing: clamp, cancel cycles, trim overfull edges, derive T, fill slack
    let mut fm = DMatrix::from_fn(n, m, |k, j| sol.x[k * m + j].max(0.0) * cmax);
    let cycles_cancelled = cancel_cycles(topo, &mut fm);
    for (j, e) in topo.edges().iter().enumerate() {
        let total: f64 = fm.column(j).sum();
        if total > e.capacity {
            let s = e.capacity / total;
            fm.column_mut(j).iter_mut().for_each(|x| *x *= s);
        }
    }
    let mut demand = derive_demand(topo, &fm);
    for (j, e) in topo.edges().iter().enumerate() {
        let deficit = e.capacity - fm.column(j).sum();
        if deficit > 0.0 {
            fm[(e.head, j)] += deficit;
            demand[(e.head, e.tail)] += deficit;
        }
    }
    let demand = TrafficDemandMatrix::complete(&demand.map(|x| x.max(0.0)))?;
    let flows = DestinationFlowMatrix::new(fm)?;

    let mut phi = Vec::with_capacity(npairs);
    let mut utility = Vec::with_capacity(npairs);
    for ((k, l), u) in utilities.iter() {
        let ph = u.eval(demand.get(k, l));
        let uv = alpha_utility(ph, alpha)
            .map_err(|e| Error::Solver(format!("allocation for ({}, {}) is degenerate: {e}", k + 1, l + 1)))?;
        phi.push(ph);
        utility.push(uv);
    }
    let objective = utility.iter().sum();
    Ok(AllocationResult {
        demand,
        flows,
        objective,
        phi,
        utility,
        status,
        stats: SolveStats {
            iterations: sol.iterations,
            solve_time_secs: sol.solve_time,
            solver_objective,
            cycles_cancelled,
        },
    })
}

/// `T_ki = (outflow - inflow)` of destination-`k` flow at node `i`; diagonal left zero.
fn derive_demand(topo: &Topology, f: &DMatrix<f64>) -> DMatrix<f64> {
    let n = topo.node_count();
    DMatrix::from_fn(n, n, |k, i| {
        if k == i {
            return 0.0;
        }
        let out: f64 = topo.out_edges(i).iter().map(|&j| f[(k, j)]).sum();
        let inn: f64 = topo.in_edges(i).iter().map(|&j| f[(k, j)]).sum();
        out - inn
    })
}

/// Conservation and capacity residuals of a solved allocation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ResidualReport {
    /// `max |T + F A^T|`, Mb/s.
    pub max_conservation: f64,
    pub mean_conservation: f64,
    /// `max |sum_k F_kj - c_j| / c_j`.
    pub max_capacity_rel: f64,
    pub mean_capacity_rel: f64,
}

pub fn residual_report(topology: &Topology, result: &AllocationResult) -> Result<ResidualReport> {
    if let SolveStatus::Failed(msg) = &result.status {
        return Err(Error::invalid(format!("residuals requested for a failed solve: {msg}")));
    }
    let a = build_incidence(topology);
    let r = result.flows.conservation_matrix(&result.demand, &a);
    let max_conservation = r.iter().fold(0.0f64, |acc, x| acc.max(x.abs()));
    let mean_conservation = r.iter().map(|x| x.abs()).sum::<f64>() / r.len() as f64;
    let rel: Vec<f64> = result
        .flows
        .edge_totals()
        .iter()
        .zip(topology.edges())
        .map(|(t, e)| (t - e.capacity).abs() / e.capacity)
        .collect();
    Ok(ResidualReport {
        max_conservation,
        mean_conservation,
        max_capacity_rel: rel.iter().cloned().fold(0.0, f64::max),
        mean_capacity_rel: rel.iter().sum::<f64>() / rel.len() as f64,
    })
}
