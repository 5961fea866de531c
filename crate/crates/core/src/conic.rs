//! Row-by-row builder for conic programs solved with Clarabel.
//!
//! Every constraint is stored in Clarabel's form `A x + s = b, s in K`; the
//! helpers below take the natural "affine expression in cone" view instead.

use clarabel::algebra::CscMatrix;
use clarabel::solver::{
    DefaultSettings, DefaultSolver, IPSolver, SolverStatus, SupportedConeT,
};

/// Sparse affine expression `sum coeff * x[var] + constant`.
#[derive(Debug, Clone, Default)]
pub(crate) struct Affine {
    pub terms: Vec<(usize, f64)>,
    pub constant: f64,
}

impl Affine {
    pub fn var(v: usize, coeff: f64) -> Self {
        Affine {
            terms: vec![(v, coeff)],
            constant: 0.0,
        }
    }

    pub fn constant(c: f64) -> Self {
        Affine {
            terms: Vec::new(),
            constant: c,
        }
    }

    pub fn plus(mut self, v: usize, coeff: f64) -> Self {
        self.terms.push((v, coeff));
        self
    }

    pub fn offset(mut self, c: f64) -> Self {
        self.constant += c;
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Cone {
    Zero,
    Nonneg,
    Power(f64),
    Exp,
}

#[derive(Debug, Clone)]
pub(crate) struct ConicSolution {
    pub status: SolverStatus,
    pub x: Vec<f64>,
    pub z: Vec<f64>,
    pub objective: f64,
    pub iterations: u32,
    pub solve_time: f64,
}

impl ConicSolution {
    pub fn solved(&self) -> bool {
        self.status == SolverStatus::Solved
    }
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct Tolerances {
    pub feas: f64,
    pub gap: f64,
    pub max_iter: u32,
}

#[derive(Debug, Clone)]
pub(crate) struct ConicBuilder {
    nvars: usize,
    q: Vec<f64>,
    rows: Vec<(Vec<(usize, f64)>, f64)>,
    cones: Vec<Cone>,
}

impl ConicBuilder {
    pub fn new(nvars: usize) -> Self {
        ConicBuilder {
            nvars,
            q: vec![0.0; nvars],
            rows: Vec::new(),
            cones: Vec::new(),
        }
    }

    /// Adds `coeff * x[var]` to the minimized objective.
    pub fn minimize(&mut self, var: usize, coeff: f64) {
        self.q[var] += coeff;
    }

    /// Pushes the slack row `s = expr`, i.e. `A = -terms`, `b = constant`.
    fn push(&mut self, expr: Affine, cone: Cone) -> usize {
        let terms = expr.terms.into_iter().map(|(v, c)| (v, -c)).collect();
        self.rows.push((terms, expr.constant));
        self.cones.push(cone);
        self.rows.len() - 1
    }

    /// `expr == 0`; returns the row index (for reading duals).
    pub fn zero(&mut self, expr: Affine) -> usize {
        self.push(expr, Cone::Zero)
    }

    /// `expr >= 0`.
    pub fn nonneg(&mut self, expr: Affine) -> usize {
        self.push(expr, Cone::Nonneg)
    }

    /// `(a, b, c)` in the power cone `a^p b^(1-p) >= |c|`, `a, b >= 0`.
    pub fn power(&mut self, a: Affine, b: Affine, c: Affine, p: f64) {
        self.push(a, Cone::Power(p));
        self.push(b, Cone::Power(p));
        self.push(c, Cone::Power(p));
    }

    /// `(a, b, c)` in the exponential cone `b exp(a / b) <= c`, `b > 0`.
    pub fn exp(&mut self, a: Affine, b: Affine, c: Affine) {
        self.push(a, Cone::Exp);
        self.push(b, Cone::Exp);
        self.push(c, Cone::Exp);
    }

    fn cone_list(&self) -> Vec<SupportedConeT<f64>> {
        let mut out = Vec::new();
        let mut i = 0;
        while i < self.cones.len() {
            match self.cones[i] {
                Cone::Zero | Cone::Nonneg => {
                    let kind = self.cones[i];
                    let start = i;
                    while i < self.cones.len() && self.cones[i] == kind {
                        i += 1;
                    }
                    out.push(if kind == Cone::Zero {
                        SupportedConeT::ZeroConeT(i - start)
                    } else {
                        SupportedConeT::NonnegativeConeT(i - start)
                    });
                }
                Cone::Power(p) => {
                    out.push(SupportedConeT::PowerConeT(p));
                    i += 3;
                }
                Cone::Exp => {
                    out.push(SupportedConeT::ExponentialConeT());
                    i += 3;
                }
            }
        }
        out
    }

    pub fn solve(&self, tol: Tolerances) -> Result<ConicSolution, String> {
        let (mut ri, mut ci, mut vals) = (Vec::new(), Vec::new(), Vec::new());
        let mut b = Vec::with_capacity(self.rows.len());
        for (r, (terms, rhs)) in self.rows.iter().enumerate() {
            for &(v, c) in terms {
                if c != 0.0 {
                    ri.push(r);
                    ci.push(v);
                    vals.push(c);
                }
            }
            b.push(*rhs);
        }
        let a = CscMatrix::new_from_triplets(self.rows.len(), self.nvars, ri, ci, vals);
        let p = CscMatrix::zeros((self.nvars, self.nvars));
        let settings = DefaultSettings {
            verbose: false,
            max_iter: tol.max_iter,
            tol_feas: tol.feas,
            tol_gap_abs: tol.gap,
            tol_gap_rel: tol.gap,
            ..DefaultSettings::default()
        };
        let cones = self.cone_list();
        let mut solver = DefaultSolver::new(&p, &self.q, &a, &b, &cones, settings)
            .map_err(|e| format!("solver setup failed: {e}"))?;
        solver.solve();
        let sol = &solver.solution;
        Ok(ConicSolution {
            status: sol.status,
            x: sol.x.clone(),
            z: sol.z.clone(),
            objective: sol.obj_val,
            iterations: sol.iterations,
            solve_time: sol.solve_time,
        })
    }
}
