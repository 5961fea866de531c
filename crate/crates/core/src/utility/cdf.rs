use crate::error::{Error, Result};

/// Empirical CDF of historical rates: `Phi(x) = #{samples <= x} / t`.
#[derive(Debug, Clone, PartialEq)]
pub struct EmpiricalCdf {
    samples: Vec<f64>,
}

impl EmpiricalCdf {
    pub fn new(mut samples: Vec<f64>) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::invalid("empirical CDF needs at least one sample"));
        }
        if let Some(v) = samples.iter().find(|v| !(v.is_finite() && **v >= 0.0)) {
            return Err(Error::invalid(format!("rate samples must be finite and >= 0, found {v}")));
        }
        samples.sort_by(f64::total_cmp);
        Ok(EmpiricalCdf { samples })
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Number of samples `<= x`.
    pub fn count_le(&self, x: f64) -> usize {
        self.samples.partition_point(|&s| s <= x)
    }

    pub fn eval(&self, x: f64) -> f64 {
        self.count_le(x) as f64 / self.len() as f64
    }

    pub fn median(&self) -> f64 {
        let t = self.len();
        if t % 2 == 1 {
            self.samples[t / 2]
        } else {
            0.5 * (self.samples[t / 2 - 1] + self.samples[t / 2])
        }
    }

    pub fn max(&self) -> f64 {
        *self.samples.last().unwrap()
    }

    /// The fitting targets `(r(i), Phi(r(i)))` for every sample at or above the median.
    pub fn upper_points(&self) -> Vec<(f64, f64)> {
        let med = self.median();
        self.samples
            .iter()
            .filter(|&&r| r >= med)
            .map(|&r| (r, self.eval(r)))
            .collect()
    }
}
