//! Small dense linear programs, solved by a two-phase tableau simplex.
//!
//! Used by the max-min oracle and by tests that need an answer computed
//! independently of the conic solver.

const EPS: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sense {
    Le,
    Eq,
    Ge,
}

/// `maximize c.x` subject to the rows and `x >= 0`.
#[derive(Debug, Clone)]
pub struct LinearProgram {
    nvars: usize,
    objective: Vec<f64>,
    rows: Vec<(Vec<(usize, f64)>, Sense, f64)>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum LpOutcome {
    Optimal { x: Vec<f64>, objective: f64 },
    Infeasible,
    Unbounded,
}

impl LpOutcome {
    pub fn optimal(self) -> Option<(Vec<f64>, f64)> {
        match self {
            LpOutcome::Optimal { x, objective } => Some((x, objective)),
            _ => None,
        }
    }
}

impl LinearProgram {
    pub fn new(nvars: usize) -> Self {
        LinearProgram {
            nvars,
            objective: vec![0.0; nvars],
            rows: Vec::new(),
        }
    }

    pub fn nvars(&self) -> usize {
        self.nvars
    }

    pub fn set_objective(&mut self, var: usize, coeff: f64) {
        self.objective[var] = coeff;
    }

    pub fn clear_objective(&mut self) {
        self.objective.iter_mut().for_each(|c| *c = 0.0);
    }

    pub fn add_row(&mut self, terms: Vec<(usize, f64)>, sense: Sense, rhs: f64) {
        debug_assert!(terms.iter().all(|&(v, _)| v < self.nvars));
        self.rows.push((terms, sense, rhs));
    }

    /// Largest violation of any row by `x` (sign constraints excluded).
    pub fn max_violation(&self, x: &[f64]) -> f64 {
        self.rows
            .iter()
            .map(|(terms, sense, rhs)| {
                let lhs: f64 = terms.iter().map(|&(v, c)| c * x[v]).sum();
                match sense {
                    Sense::Le => (lhs - rhs).max(0.0),
                    Sense::Ge => (rhs - lhs).max(0.0),
                    Sense::Eq => (lhs - rhs).abs(),
                }
            })
            .fold(0.0, f64::max)
    }

    pub fn solve(&self) -> LpOutcome {
        Tableau::build(self).run(&self.objective)
    }
}

#[cfg(test)]
impl LinearProgram {
    /// The same program through the conic solver, for cross-checks.
    pub(crate) fn solve_conic(&self) -> Option<(Vec<f64>, f64)> {
        use crate::conic::{Affine, ConicBuilder, Tolerances};
        let mut b = ConicBuilder::new(self.nvars);
        for (v, &c) in self.objective.iter().enumerate() {
            b.minimize(v, -c);
        }
        for (terms, sense, rhs) in &self.rows {
            let mut e = Affine::constant(-rhs);
            for &(v, c) in terms {
                e = e.plus(v, c);
            }
            match sense {
                Sense::Eq => {
                    b.zero(e);
                }
                Sense::Ge => {
                    b.nonneg(e);
                }
                Sense::Le => {
                    let neg = Affine { terms: e.terms.iter().map(|&(v, c)| (v, -c)).collect(), constant: -e.constant };
                    b.nonneg(neg);
                }
            }
        }
        for v in 0..self.nvars {
            b.nonneg(Affine::var(v, 1.0));
        }
        let s = b.solve(Tolerances { feas: 1e-10, gap: 1e-10, max_iter: 500 }).ok()?;
        s.solved().then(|| (s.x.clone(), -s.objective))
    }
}

struct Tableau {
    ncols: usize,
    // row-major, each row has ncols + 1 entries (last = rhs)
    a: Vec<Vec<f64>>,
    basis: Vec<usize>,
    // original row index of every tableau row
    rows: Vec<usize>,
    nstruct: usize,
    first_art: usize,
    // equilibrated standard form without artificials, for the final solve
    orig: Vec<Vec<f64>>,
}

impl Tableau {
    fn build(lp: &LinearProgram) -> Self {
        let nslack = lp.rows.iter().filter(|r| r.1 != Sense::Eq).count();
        let nrows = lp.rows.len();
        let first_art = lp.nvars + nslack;
        let ncols = first_art + nrows;
        let mut a = Vec::with_capacity(nrows);
        let mut basis = Vec::with_capacity(nrows);
        let mut slack = lp.nvars;
        for (i, (terms, sense, rhs)) in lp.rows.iter().enumerate() {
            let mut row = vec![0.0; ncols + 1];
            for &(v, c) in terms {
                row[v] += c;
            }
            let norm = row[..lp.nvars].iter().fold(0.0f64, |m, x| m.max(x.abs()));
            let norm = if norm > 0.0 { norm } else { 1.0 };
            match sense {
                Sense::Le => {
                    row[slack] = norm;
                    slack += 1;
                }
                Sense::Ge => {
                    row[slack] = -norm;
                    slack += 1;
                }
                Sense::Eq => {}
            }
            row[ncols] = *rhs;
            let sign = if *rhs < 0.0 { -1.0 } else { 1.0 };
            row.iter_mut().for_each(|x| *x *= sign / norm);
            row[first_art + i] = 1.0;
            basis.push(first_art + i);
            a.push(row);
        }
        let orig = a
            .iter()
            .map(|r| {
                let mut o = r[..first_art].to_vec();
                o.push(r[ncols]);
                o
            })
            .collect();
        Tableau {
            ncols,
            a,
            basis,
            rows: (0..nrows).collect(),
            nstruct: lp.nvars,
            first_art,
            orig,
        }
    }

    fn pivot(&mut self, r: usize, c: usize, d: &mut [f64]) {
        let p = self.a[r][c];
        self.a[r].iter_mut().for_each(|x| *x /= p);
        self.a[r][c] = 1.0;
        let prow = std::mem::take(&mut self.a[r]);
        let nz: Vec<usize> = (0..prow.len()).filter(|&j| prow[j] != 0.0).collect();
        let update = |row: &mut [f64]| {
            let f = row[c];
            if f != 0.0 {
                for &j in &nz {
                    row[j] -= f * prow[j];
                }
                row[c] = 0.0;
            }
        };
        for (i, row) in self.a.iter_mut().enumerate() {
            if i != r {
                update(row);
            }
        }
        update(d);
        self.a[r] = prow;
        self.basis[r] = c;
        let nc = self.ncols;
        for row in &mut self.a {
            if row[nc] < 0.0 && row[nc] > -1e-9 {
                row[nc] = 0.0;
            }
        }
    }

    /// Minimizes `cost` over columns `< limit`. Returns false if unbounded.
    fn optimize(&mut self, cost: &[f64], limit: usize) -> bool {
        let nc = self.ncols;
        // reduced costs, with the negated objective value in the last slot
        let mut d: Vec<f64> = cost.to_vec();
        d.push(0.0);
        for (row, &b) in self.a.iter().zip(&self.basis) {
            let cb = cost[b];
            if cb != 0.0 {
                for (x, &y) in d.iter_mut().zip(row) {
                    *x -= cb * y;
                }
            }
        }
        let mut degenerate_streak = 0usize;
        let max_iter = 50 * (self.a.len() + nc) + 1000;
        for _ in 0..max_iter {
            let bland = degenerate_streak > 50;
            let entering = if bland {
                (0..limit).find(|&j| d[j] < -EPS)
            } else {
                (0..limit)
                    .filter(|&j| d[j] < -EPS)
                    .min_by(|&x, &y| d[x].total_cmp(&d[y]))
            };
            let Some(c) = entering else { return true };
            let min_ratio = self
                .a
                .iter()
                .filter(|row| row[c] > EPS)
                .map(|row| row[nc] / row[c])
                .fold(f64::INFINITY, f64::min);
            if min_ratio == f64::INFINITY {
                return false;
            }
            let tie = 1e-12 * (1.0 + min_ratio.abs());
            let candidates = self
                .a
                .iter()
                .enumerate()
                .filter(|(_, row)| row[c] > EPS && row[nc] / row[c] <= min_ratio + tie);
            let r = if bland {
                candidates.min_by_key(|(i, _)| self.basis[*i]).map(|(i, _)| i)
            } else {
                candidates.max_by(|x, y| x.1[c].total_cmp(&y.1[c])).map(|(i, _)| i)
            }
            .expect("ratio test found a row");
            if min_ratio <= tie {
                degenerate_streak += 1;
            } else {
                degenerate_streak = 0;
            }
            self.pivot(r, c, &mut d);
        }
        true
    }

    /// Basic solution recomputed from the original rows, falling back to the
    /// tableau values when that is not more accurate.
    fn basic_solution(&self) -> Vec<f64> {
        let last = self.first_art;
        let mut tab = vec![0.0; self.first_art];
        for (row, &bv) in self.a.iter().zip(&self.basis) {
            if bv < self.first_art {
                tab[bv] = row[self.ncols].max(0.0);
            }
        }
        let k = self.basis.len();
        let b = nalgebra::DMatrix::from_fn(k, k, |i, j| self.orig[self.rows[i]][self.basis[j]]);
        let rhs = nalgebra::DVector::from_fn(k, |i, _| self.orig[self.rows[i]][last]);
        let mut x = tab.clone();
        if self.basis.iter().all(|&c| c < self.first_art) {
            if let Some(sol) = b.lu().solve(&rhs) {
                let mut direct = vec![0.0; self.first_art];
                for (&c, v) in self.basis.iter().zip(sol.iter()) {
                    direct[c] = v.max(0.0);
                }
                if self.residual(&direct) <= self.residual(&tab) {
                    x = direct;
                }
            }
        }
        x.truncate(self.nstruct);
        x
    }

    fn residual(&self, x: &[f64]) -> f64 {
        let last = self.first_art;
        self.orig
            .iter()
            .map(|r| (r[..last].iter().zip(x).map(|(a, b)| a * b).sum::<f64>() - r[last]).abs())
            .fold(0.0, f64::max)
    }

    fn run(mut self, objective: &[f64]) -> LpOutcome {
        let mut cost = vec![0.0; self.ncols];
        cost[self.first_art..].iter_mut().for_each(|c| *c = 1.0);
        self.optimize(&cost, self.ncols);
        let infeas: f64 = self
            .a
            .iter()
            .zip(&self.basis)
            .filter(|(_, &b)| b >= self.first_art)
            .map(|(row, _)| row[self.ncols])
            .sum();
        let scale = 1.0 + self.orig.iter().map(|r| r[self.first_art].abs()).fold(0.0, f64::max);
        if infeas > 1e-8 * scale {
            return LpOutcome::Infeasible;
        }
        // drive artificials out of the basis, dropping redundant rows
        let mut scratch = vec![0.0; self.ncols + 1];
        let mut i = 0;
        while i < self.a.len() {
            if self.basis[i] >= self.first_art {
                let nc = self.ncols;
                self.a[i][nc] = 0.0;
                match (0..self.first_art).max_by(|&x, &y| self.a[i][x].abs().total_cmp(&self.a[i][y].abs())) {
                    Some(j) if self.a[i][j].abs() > 1e-7 => {
                        self.pivot(i, j, &mut scratch);
                        i += 1;
                    }
                    _ => {
                        self.a.remove(i);
                        self.basis.remove(i);
                        self.rows.remove(i);
                    }
                }
            } else {
                i += 1;
            }
        }
        let mut cost = vec![0.0; self.ncols];
        for (c, &o) in cost.iter_mut().zip(objective) {
            *c = -o;
        }
        if !self.optimize(&cost, self.first_art) {
            return LpOutcome::Unbounded;
        }
        let x = self.basic_solution();
        let objective = x.iter().zip(objective).map(|(a, b)| a * b).sum();
        LpOutcome::Optimal { x, objective }
    }
}
