//! Per-pair utilities and the alpha-fair outer utility.

mod cdf;
mod io;
mod pwl;

pub use cdf::EmpiricalCdf;
pub use io::{load_utilities, parse_utilities, write_utilities};
pub use pwl::{degenerate_pwl, fit_concave_pwl, fit_rms, ConcavePwl, PwlFitParams, DEGENERATE_GAP};

use crate::error::{Error, Result};
use crate::net::{ie_pairs, pair_index, TrafficDemandMatrix};

/// Default floor on measured rates for real-time utilities, in Mb/s.
pub const DEFAULT_RATE_FLOOR: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AlphaFairness(f64);

impl AlphaFairness {
    pub fn new(alpha: f64) -> Result<Self> {
        if !(alpha.is_finite() && alpha >= 0.0) {
            return Err(Error::invalid(format!("alpha must be finite and >= 0, got {alpha}")));
        }
        Ok(AlphaFairness(alpha))
    }

    pub fn value(self) -> f64 {
        self.0
    }

    pub fn utility(self, f: f64) -> Result<f64> {
        alpha_utility(f, self.0)
    }
}

impl Default for AlphaFairness {
    fn default() -> Self {
        AlphaFairness(2.0)
    }
}

/// `U(f) = f^(1-a) / (1-a)`, or `log f` when `a == 1`.
pub fn alpha_utility(f: f64, alpha: f64) -> Result<f64> {
    if !(alpha.is_finite() && alpha >= 0.0) {
        return Err(Error::Domain(format!("alpha must be finite and >= 0, got {alpha}")));
    }
    if f.is_nan() || f < 0.0 || (f == 0.0 && alpha >= 1.0) {
        return Err(Error::Domain(format!("alpha-utility with alpha {alpha} is undefined at {f}")));
    }
    Ok(if alpha == 0.0 {
        f
    } else if alpha == 1.0 {
        f.ln()
    } else {
        f.powf(1.0 - alpha) / (1.0 - alpha)
    })
}

/// `phi(T) = T / rate`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinearUtility {
    rate: f64,
}

impl LinearUtility {
    pub fn new(rate: f64) -> Result<Self> {
        if !(rate.is_finite() && rate > 0.0) {
            return Err(Error::invalid(format!("linear utility rate must be > 0, got {rate}")));
        }
        Ok(LinearUtility { rate })
    }

    pub fn rate(&self) -> f64 {
        self.rate
    }

    pub fn eval(&self, t: f64) -> f64 {
        t / self.rate
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum PairUtility {
    Linear(LinearUtility),
    Pwl(ConcavePwl),
}

impl PairUtility {
    pub fn eval(&self, t: f64) -> f64 {
        match self {
            PairUtility::Linear(l) => l.eval(t),
            PairUtility::Pwl(p) => p.eval(t),
        }
    }
}

/// One utility per ordered IE pair, stored in [`ie_pairs`] order.
#[derive(Debug, Clone, PartialEq)]
pub struct UtilityFamily {
    n: usize,
    alpha: AlphaFairness,
    utilities: Vec<PairUtility>,
}

impl UtilityFamily {
    pub fn new(n: usize, alpha: AlphaFairness, utilities: Vec<PairUtility>) -> Result<Self> {
        if n < 2 || utilities.len() != n * (n - 1) {
            return Err(Error::invalid(format!(
                "utility family for {n} nodes needs {} pair utilities, got {}",
                n * n.saturating_sub(1),
                utilities.len()
            )));
        }
        Ok(UtilityFamily { n, alpha, utilities })
    }

    pub fn node_count(&self) -> usize {
        self.n
    }

    pub fn alpha(&self) -> AlphaFairness {
        self.alpha
    }

    pub fn with_alpha(mut self, alpha: AlphaFairness) -> Self {
        self.alpha = alpha;
        self
    }

    /// Utility of pair `(dest, source)`.
    pub fn get(&self, dest: usize, source: usize) -> &PairUtility {
        &self.utilities[pair_index(self.n, dest, source)]
    }

    /// `((dest, source), utility)` in pair order.
    pub fn iter(&self) -> impl Iterator<Item = ((usize, usize), &PairUtility)> {
        ie_pairs(self.n).zip(self.utilities.iter())
    }

    pub fn utilities(&self) -> &[PairUtility] {
        &self.utilities
    }
}

/// Real-time utilities `phi(T) = T / max(r, rate_floor)` from measured rates.
pub fn realtime_utilities(rates: &TrafficDemandMatrix, rate_floor: f64, alpha: AlphaFairness) -> Result<UtilityFamily> {
    if !(rate_floor.is_finite() && rate_floor > 0.0) {
        return Err(Error::invalid("rate floor must be positive"));
    }
    let n = rates.n();
    let utilities = ie_pairs(n)
        .map(|(k, l)| LinearUtility::new(rates.get(k, l).max(rate_floor)).map(PairUtility::Linear))
        .collect::<Result<Vec<_>>>()?;
    UtilityFamily::new(n, alpha, utilities)
}

/// Returns `(phi(T), U(phi(T)))` for one pair.
pub fn evaluate_utility(family: &UtilityFamily, dest: usize, source: usize, t: f64) -> Result<(f64, f64)> {
    if dest == source || dest >= family.n || source >= family.n {
        return Err(Error::invalid(format!("({}, {}) is not an IE pair", dest + 1, source + 1)));
    }
    if !(t.is_finite() && t >= 0.0) {
        return Err(Error::invalid(format!("circuit capacity must be >= 0, got {t}")));
    }
    let phi = family.get(dest, source).eval(t);
    Ok((phi, family.alpha.utility(phi)?))
}
