//! Increasing concave piecewise-linear utilities fitted to empirical CDFs.

use nalgebra::{DMatrix, DVector};

use super::EmpiricalCdf;
use crate::error::{Error, Result};

/// Value at the kink of the fallback utility used when the history has a
/// single distinct value at or above its median.
pub const DEGENERATE_GAP: f64 = 1e-3;

const MAX_SEGMENTS: usize = 16;

/// Increasing concave piecewise-linear function.
///
/// Between breakpoints it interpolates linearly, left of the first breakpoint
/// it extends the first segment, and right of the last one it continues with
/// `tail_slope`. Evaluation clips the result from below at `floor`.
#[derive(Debug, Clone, PartialEq)]
pub struct ConcavePwl {
    breakpoints: Vec<(f64, f64)>,
    tail_slope: f64,
    floor: f64,
}

impl ConcavePwl {
    pub fn new(breakpoints: Vec<(f64, f64)>, tail_slope: f64, floor: f64) -> Result<Self> {
        if breakpoints.is_empty() {
            return Err(Error::invalid("PWL needs at least one breakpoint"));
        }
        if !(tail_slope.is_finite() && tail_slope > 0.0) {
            return Err(Error::invalid("PWL tail slope must be positive"));
        }
        if !(floor.is_finite() && floor > 0.0) {
            return Err(Error::invalid("PWL floor must be positive"));
        }
        if breakpoints.iter().any(|(x, y)| !x.is_finite() || !y.is_finite()) {
            return Err(Error::invalid("PWL breakpoints must be finite"));
        }
        if breakpoints.windows(2).any(|w| w[1].0 <= w[0].0) {
            return Err(Error::invalid("PWL breakpoint x values must be strictly increasing"));
        }
        let pwl = ConcavePwl {
            breakpoints,
            tail_slope,
            floor,
        };
        let slopes = pwl.segment_slopes();
        let tol = |a: f64, b: f64| 1e-9 * a.abs().max(b.abs()).max(1e-12);
        for w in slopes.windows(2) {
            if w[1] > w[0] + tol(w[0], w[1]) {
                return Err(Error::invalid(format!(
                    "PWL is not concave: slope {} follows slope {}",
                    w[1], w[0]
                )));
            }
        }
        if let Some(&last) = slopes.last() {
            if last < tail_slope - tol(last, tail_slope) {
                return Err(Error::invalid(format!(
                    "PWL segment slope {last} is below the minimum slope {tail_slope}"
                )));
            }
        }
        Ok(pwl)
    }

    pub fn breakpoints(&self) -> &[(f64, f64)] {
        &self.breakpoints
    }

    pub fn tail_slope(&self) -> f64 {
        self.tail_slope
    }

    pub fn floor(&self) -> f64 {
        self.floor
    }

    /// Slopes of the segments between consecutive breakpoints.
    pub fn segment_slopes(&self) -> Vec<f64> {
        self.breakpoints
            .windows(2)
            .map(|w| (w[1].1 - w[0].1) / (w[1].0 - w[0].0))
            .collect()
    }

    /// The affine pieces `(slope, intercept)` whose minimum is the function.
    pub fn pieces(&self) -> Vec<(f64, f64)> {
        let mut out: Vec<(f64, f64)> = self
            .breakpoints
            .windows(2)
            .map(|w| {
                let s = (w[1].1 - w[0].1) / (w[1].0 - w[0].0);
                (s, w[0].1 - s * w[0].0)
            })
            .collect();
        let (xl, yl) = *self.breakpoints.last().unwrap();
        let tail = (self.tail_slope, yl - self.tail_slope * xl);
        if out.last().map_or(true, |&(s, _)| s != self.tail_slope) {
            out.push(tail);
        }
        out
    }

    /// Minimum over the affine pieces, without the floor.
    pub fn eval_unclipped(&self, x: f64) -> f64 {
        self.pieces()
            .iter()
            .map(|&(s, b)| s * x + b)
            .fold(f64::INFINITY, f64::min)
    }

    pub fn eval(&self, x: f64) -> f64 {
        self.eval_unclipped(x).max(self.floor)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PwlFitParams {
    pub segments: usize,
    /// Minimum slope of every piece, per Mb/s.
    pub min_slope: f64,
    /// Lower clip applied when the utility is evaluated.
    pub floor: f64,
}

impl Default for PwlFitParams {
    fn default() -> Self {
        PwlFitParams {
            segments: 3,
            min_slope: 1e-6,
            floor: 1e-6,
        }
    }
}

/// Least-squares increasing concave PWL fit to the CDF points at or above the median.
///
/// Knots sit at equal-count quantiles of those points. The fit minimizes the
/// squared error subject to nonincreasing segment slopes, all at least
/// `min_slope`. With a single distinct value `v` above the median the result is
/// a fallback that rises from the floor at 0 to `1 - DEGENERATE_GAP` at `v`.
pub fn fit_concave_pwl(cdf: &EmpiricalCdf, params: &PwlFitParams) -> Result<ConcavePwl> {
    if params.segments == 0 || params.segments > MAX_SEGMENTS {
        return Err(Error::invalid(format!(
            "PWL segment count must be in 1..={MAX_SEGMENTS}, got {}",
            params.segments
        )));
    }
    let points = cdf.upper_points();
    let knots = quantile_knots(&points, params.segments);
    if knots.len() < 2 {
        return degenerate_pwl(cdf.max(), params);
    }
    let (intercept, slopes) = best_constrained_fit(&points, &knots, params.min_slope);
    let mut bps = Vec::with_capacity(knots.len());
    let mut y = intercept;
    bps.push((knots[0], y));
    for (i, s) in slopes.iter().enumerate() {
        y += s * (knots[i + 1] - knots[i]);
        bps.push((knots[i + 1], y));
    }
    ConcavePwl::new(bps, params.min_slope, params.floor)
}

/// The fallback for histories with one distinct value at or above the median.
pub fn degenerate_pwl(value: f64, params: &PwlFitParams) -> Result<ConcavePwl> {
    let top = 1.0 - DEGENERATE_GAP;
    let bps = if value > 0.0 && (top - params.floor) / value >= params.min_slope {
        vec![(0.0, params.floor), (value, top)]
    } else {
        vec![(value, top)]
    };
    ConcavePwl::new(bps, params.min_slope, params.floor)
}

fn quantile_knots(points: &[(f64, f64)], segments: usize) -> Vec<f64> {
    let mut xs: Vec<f64> = points.iter().map(|p| p.0).collect();
    xs.sort_by(f64::total_cmp);
    let distinct = {
        let mut d = xs.clone();
        d.dedup();
        d.len()
    };
    if distinct < 2 {
        return Vec::new();
    }
    let s = segments.min(distinct - 1);
    let last = xs.len() - 1;
    let mut knots: Vec<f64> = (0..=s)
        .map(|i| xs[((i * last) as f64 / s as f64).round() as usize])
        .collect();
    knots.dedup();
    knots
}

/// Contribution of segment `i` (from `knots[i]` to `knots[i + 1]`) at `x`.
fn segment_span(knots: &[f64], i: usize, x: f64) -> f64 {
    (x - knots[i]).clamp(0.0, knots[i + 1] - knots[i])
}

/// Solves the constrained least-squares problem exactly by enumerating which
/// constraints are active: consecutive segments sharing a slope form groups,
/// and the last group's slope is either free or pinned to `min_slope`.
/// Each pattern is an unconstrained least-squares problem; the best feasible
/// pattern is the optimum because the true active set is among them.
fn best_constrained_fit(points: &[(f64, f64)], knots: &[f64], min_slope: f64) -> (f64, Vec<f64>) {
    let segs = knots.len() - 1;
    let mut best: Option<(f64, f64, Vec<f64>)> = None;
    for mask in 0u32..(1 << (segs - 1)) {
        // bit i set => segments i and i+1 share a slope
        let mut group_of = vec![0usize; segs];
        for i in 1..segs {
            group_of[i] = group_of[i - 1] + usize::from(mask & (1 << (i - 1)) == 0);
        }
        let groups = group_of[segs - 1] + 1;
        for pin_last in [false, true] {
            if let Some((sse, b, slopes)) = solve_pattern(points, knots, &group_of, groups, pin_last, min_slope) {
                if best.as_ref().map_or(true, |(bs, _, _)| sse < *bs - 1e-15 * bs.abs()) {
                    best = Some((sse, b, slopes));
                }
            }
        }
    }
    let (_, b, mut slopes) = best.expect("pinning every slope to the minimum is always feasible");
    // remove round-off so the result satisfies the constraints exactly
    let mut floor = min_slope;
    for s in slopes.iter_mut().rev() {
        *s = s.max(floor);
        floor = *s;
    }
    (b, slopes)
}

fn solve_pattern(
    points: &[(f64, f64)],
    knots: &[f64],
    group_of: &[usize],
    groups: usize,
    pin_last: bool,
    min_slope: f64,
) -> Option<(f64, f64, Vec<f64>)> {
    let free_groups = if pin_last { groups - 1 } else { groups };
    let cols = 1 + free_groups;
    let rows = points.len();
    let mut a = DMatrix::zeros(rows, cols);
    let mut rhs = DVector::zeros(rows);
    for (r, &(x, y)) in points.iter().enumerate() {
        a[(r, 0)] = 1.0;
        let mut target = y;
        for (i, &g) in group_of.iter().enumerate() {
            let span = segment_span(knots, i, x);
            if g < free_groups {
                a[(r, 1 + g)] += span;
            } else {
                target -= min_slope * span;
            }
        }
        rhs[r] = target;
    }
    let sol = a.clone().svd(true, true).solve(&rhs, 1e-13).ok()?;
    let group_slope = |g: usize| if g < free_groups { sol[1 + g] } else { min_slope };
    let tol = 1e-10;
    for g in 0..groups {
        let s = group_slope(g);
        if !s.is_finite() || s < min_slope - tol {
            return None;
        }
        if g + 1 < groups && group_slope(g + 1) > s + tol {
            return None;
        }
    }
    let resid = &a * &sol - &rhs;
    let slopes = group_of.iter().map(|&g| group_slope(g)).collect();
    Some((resid.norm_squared(), sol[0], slopes))
}

/// Root-mean-square distance between `pwl` and the CDF points it was fitted to.
pub fn fit_rms(cdf: &EmpiricalCdf, pwl: &ConcavePwl) -> f64 {
    let pts = cdf.upper_points();
    let sse: f64 = pts.iter().map(|&(x, y)| (pwl.eval(x) - y).powi(2)).sum();
    (sse / pts.len() as f64).sqrt()
}
