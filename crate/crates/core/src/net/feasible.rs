use clarabel::solver::SolverStatus;
use nalgebra::DMatrix;

use super::{build_incidence, DestinationFlowMatrix, Topology, TrafficDemandMatrix};
use crate::conic::{Affine, ConicBuilder, Tolerances};
use crate::error::{Error, Result};

/// Dual ray proving that no flow supports the demand.
///
/// `node_prices[(k, i)]` prices the conservation equation of destination `k`
/// at node `i` (zero on the diagonal); `edge_prices[j] >= 0` prices edge `j`'s
/// capacity. Both are in the solver's scaled units; only their signs and ratios
/// are meaningful.
#[derive(Debug, Clone, PartialEq)]
pub struct InfeasibilityCertificate {
    pub node_prices: DMatrix<f64>,
    pub edge_prices: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Feasibility {
    Feasible(DestinationFlowMatrix),
    Infeasible(InfeasibilityCertificate),
    /// The solver neither certified a witness nor infeasibility.
    Unknown(String),
}

impl Feasibility {
    pub fn is_feasible(&self) -> bool {
        matches!(self, Feasibility::Feasible(_))
    }
}

/// Decides whether `demand` lies in the flow polytope of `topology`: is there
/// `F >= 0` with `T + F A^T = 0` and per-edge totals at most capacity?
///
/// `tolerance` is an absolute bound in Mb/s on the witness residuals. Among
/// feasible flows the witness minimizes total edge flow, so it carries no cycles.
pub fn check_feasible(topology: &Topology, demand: &TrafficDemandMatrix, tolerance: f64) -> Result<Feasibility> {
    let n = topology.node_count();
    let m = topology.edge_count();
    if demand.n() != n {
        return Err(Error::invalid(format!(
            "demand matrix has {} nodes, topology has {n}",
            demand.n()
        )));
    }
    if !(tolerance.is_finite() && tolerance > 0.0) {
        return Err(Error::invalid("feasibility tolerance must be positive"));
    }
    let scale = topology.max_capacity();
    let a = build_incidence(topology);
    let var = |k: usize, j: usize| k * m + j;

    let mut prog = ConicBuilder::new(n * m);
    for v in 0..n * m {
        prog.minimize(v, 1.0);
    }
    let mut cons_rows = Vec::new();
    for k in 0..n {
        for i in 0..n {
            if i == k {
                continue;
            }
            let mut expr = Affine::constant(demand.get(k, i) / scale);
            for &j in topology.out_edges(i).iter().chain(topology.in_edges(i)) {
                expr = expr.plus(var(k, j), f64::from(a.get(i, j)));
            }
            cons_rows.push((k, i, prog.zero(expr)));
        }
    }
    let mut cap_rows = Vec::with_capacity(m);
    for (j, e) in topology.edges().iter().enumerate() {
        let mut expr = Affine::constant(e.capacity / scale);
        for k in 0..n {
            expr = expr.plus(var(k, j), -1.0);
        }
        cap_rows.push(prog.nonneg(expr));
    }
    for v in 0..n * m {
        prog.nonneg(Affine::var(v, 1.0));
    }

    let solver_tol = (0.1 * tolerance / scale).clamp(1e-10, 1e-6);
    let sol = match prog.solve(Tolerances {
        feas: solver_tol,
        gap: solver_tol,
        max_iter: 200,
    }) {
        Ok(s) => s,
        Err(e) => return Ok(Feasibility::Unknown(e)),
    };
    match sol.status {
        SolverStatus::Solved | SolverStatus::AlmostSolved => {
            let f = DMatrix::from_fn(n, m, |k, j| sol.x[var(k, j)].max(0.0) * scale);
            let flows = DestinationFlowMatrix::new(f)?;
            let cons = flows.conservation_residual(demand, &a);
            let cap = flows.capacity_excess(topology);
            if cons <= tolerance && cap <= tolerance {
                Ok(Feasibility::Feasible(flows))
            } else {
                Ok(Feasibility::Unknown(format!(
                    "solver returned {:?} but witness residuals are conservation {cons:e}, capacity {cap:e}",
                    sol.status
                )))
            }
        }
        SolverStatus::PrimalInfeasible | SolverStatus::AlmostPrimalInfeasible => {
            let mut node_prices = DMatrix::zeros(n, n);
            for &(k, i, r) in &cons_rows {
                node_prices[(k, i)] = sol.z[r];
            }
            let edge_prices = cap_rows.iter().map(|&r| sol.z[r]).collect();
            Ok(Feasibility::Infeasible(InfeasibilityCertificate {
                node_prices,
                edge_prices,
            }))
        }
        other => Ok(Feasibility::Unknown(format!("solver status {other:?}"))),
    }
}
