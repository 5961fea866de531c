//! Weighted max-min fair allocation by progressive filling.

use crate::error::{Error, Result};
use crate::lp::{LinearProgram, LpOutcome, Sense};
use crate::net::{ie_pairs, Topology, TrafficDemandMatrix};
use crate::utility::{PairUtility, UtilityFamily};

pub const ORACLE_MAX_NODES: usize = 6;

#[derive(Debug, Clone)]
pub struct MaxMinAllocation {
    pub demand: TrafficDemandMatrix,
    /// Max-min utility level per pair, in pair order.
    pub utilities: Vec<f64>,
}

struct Layout {
    n: usize,
    m: usize,
    npairs: usize,
    s: Vec<Option<usize>>,
    t: usize,
    nvars: usize,
}

impl Layout {
    fn demand(&self, p: usize) -> usize {
        self.n * self.m + p
    }
}

/// Pair `p`'s utility as LP terms.
fn utility_terms(lay: &Layout, family: &UtilityFamily, cmax: f64, p: usize) -> Vec<(usize, f64)> {
    match &family.utilities()[p] {
        PairUtility::Linear(lin) => vec![(lay.demand(p), cmax / lin.rate())],
        PairUtility::Pwl(_) => vec![(lay.s[p].expect("pwl pair has an epigraph variable"), 1.0)],
    }
}

fn base_program(topo: &Topology, family: &UtilityFamily, lay: &Layout) -> LinearProgram {
    let (n, m) = (lay.n, lay.m);
    let cmax = topo.max_capacity();
    let mut lp = LinearProgram::new(lay.nvars);
    for (p, (k, i)) in ie_pairs(n).enumerate() {
        let mut terms = vec![(lay.demand(p), 1.0)];
        terms.extend(topo.out_edges(i).iter().map(|&j| (k * m + j, -1.0)));
        terms.extend(topo.in_edges(i).iter().map(|&j| (k * m + j, 1.0)));
        lp.add_row(terms, Sense::Eq, 0.0);
    }
    for (j, e) in topo.edges().iter().enumerate() {
        lp.add_row((0..n).map(|k| (k * m + j, 1.0)).collect(), Sense::Le, e.capacity / cmax);
    }
    for p in 0..lay.npairs {
        if let (PairUtility::Pwl(pwl), Some(s)) = (&family.utilities()[p], lay.s[p]) {
            for (a, b) in pwl.pieces() {
                // s - a cmax tau <= b
                lp.add_row(vec![(s, 1.0), (lay.demand(p), -a * cmax)], Sense::Le, b);
            }
        }
    }
    lp
}

/// Lexicographically max-min fair utilities `phi_kl(T_kl)` over the flow
/// polytope. Capacities are upper bounds. Refuses instances with more than
/// [`ORACLE_MAX_NODES`] nodes.
pub fn maxmin_oracle(topology: &Topology, family: &UtilityFamily) -> Result<MaxMinAllocation> {
    let n = topology.node_count();
    if n > ORACLE_MAX_NODES {
        return Err(Error::invalid(format!(
            "max-min oracle is limited to {ORACLE_MAX_NODES} nodes, got {n}"
        )));
    }
    if family.node_count() != n {
        return Err(Error::invalid("utility family does not match the topology"));
    }
    let m = topology.edge_count();
    let npairs = n * (n - 1);
    let cmax = topology.max_capacity();
    let mut nvars = n * m + npairs;
    let mut s = vec![None; npairs];
    for (p, u) in family.utilities().iter().enumerate() {
        if matches!(u, PairUtility::Pwl(_)) {
            s[p] = Some(nvars);
            nvars += 1;
        }
    }
    let lay = Layout {
        n,
        m,
        npairs,
        s,
        t: nvars,
        nvars: nvars + 1,
    };
    let base = base_program(topology, family, &lay);
    let terms: Vec<Vec<(usize, f64)>> = (0..npairs).map(|p| utility_terms(&lay, family, cmax, p)).collect();
    let eval = |x: &[f64], p: usize| terms[p].iter().map(|&(v, c)| c * x[v]).sum::<f64>();

    let mut frozen: Vec<Option<f64>> = vec![None; npairs];
    let frozen_rows = |lp: &mut LinearProgram, frozen: &[Option<f64>]| {
        for (p, lvl) in frozen.iter().enumerate() {
            if let Some(l) = lvl {
                lp.add_row(terms[p].clone(), Sense::Ge, l * (1.0 - 1e-9));
            }
        }
    };
    let mut last_x;
    loop {
        let mut lp = base.clone();
        frozen_rows(&mut lp, &frozen);
        for p in (0..npairs).filter(|&p| frozen[p].is_none()) {
            let mut row = terms[p].clone();
            row.push((lay.t, -1.0));
            lp.add_row(row, Sense::Ge, 0.0);
        }
        lp.set_objective(lay.t, 1.0);
        let (x, level) = match lp.solve() {
            LpOutcome::Optimal { x, objective } => (x, objective),
            other => return Err(Error::Solver(format!("max-min level LP: {other:?}"))),
        };
        last_x = x.clone();
        let slack = 1e-7 * level.abs().max(1e-9);
        let mut newly = Vec::new();
        let mut best_max = (f64::INFINITY, usize::MAX);
        for p in (0..npairs).filter(|&p| frozen[p].is_none()) {
            if eval(&x, p) > level + slack {
                continue;
            }
            let mut probe = base.clone();
            frozen_rows(&mut probe, &frozen);
            for q in (0..npairs).filter(|&q| frozen[q].is_none() && q != p) {
                probe.add_row(terms[q].clone(), Sense::Ge, level * (1.0 - 1e-9));
            }
            for &(v, c) in &terms[p] {
                probe.set_objective(v, c);
            }
            let best = match probe.solve() {
                LpOutcome::Optimal { objective, .. } => objective,
                LpOutcome::Unbounded => f64::INFINITY,
                LpOutcome::Infeasible => level,
            };
            if best <= level + slack {
                newly.push(p);
            } else if best < best_max.0 {
                best_max = (best, p);
            }
        }
        if newly.is_empty() {
            match best_max.1 {
                usize::MAX => return Err(Error::Solver("progressive filling made no progress".into())),
                p => newly.push(p),
            }
        }
        for p in newly {
            frozen[p] = Some(level);
        }
        if frozen.iter().all(Option::is_some) {
            break;
        }
    }
    let demand = TrafficDemandMatrix::from_fn(n, |k, l| {
        let p = crate::net::pair_index(n, k, l);
        (last_x[lay.demand(p)] * cmax).max(0.0)
    })?;
    Ok(MaxMinAllocation {
        demand,
        utilities: frozen.into_iter().map(|l| l.unwrap_or(0.0)).collect(),
    })
}
