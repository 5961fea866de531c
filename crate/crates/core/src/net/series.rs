use chrono::{DateTime, Datelike, Timelike, Weekday};

use super::TrafficDemandMatrix;
use crate::error::{Error, Result};

/// Time-ordered demand snapshots sharing one node ordering.
#[derive(Debug, Clone, PartialEq)]
pub struct TrafficSeries {
    timestamps: Vec<i64>,
    matrices: Vec<TrafficDemandMatrix>,
    interval_secs: i64,
}

impl TrafficSeries {
    pub const DEFAULT_INTERVAL: i64 = 300;

    pub fn new(timestamps: Vec<i64>, matrices: Vec<TrafficDemandMatrix>, interval_secs: i64) -> Result<Self> {
        if timestamps.len() != matrices.len() {
            return Err(Error::invalid("timestamp and matrix counts differ"));
        }
        if timestamps.is_empty() {
            return Err(Error::invalid("traffic series is empty"));
        }
        if interval_secs <= 0 {
            return Err(Error::invalid("series interval must be positive"));
        }
        if timestamps.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::invalid("series timestamps must be strictly increasing"));
        }
        let n = matrices[0].n();
        if matrices.iter().any(|m| m.n() != n) {
            return Err(Error::invalid("series matrices have different node counts"));
        }
        Ok(TrafficSeries {
            timestamps,
            matrices,
            interval_secs,
        })
    }

    pub fn len(&self) -> usize {
        self.timestamps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.timestamps.is_empty()
    }

    pub fn node_count(&self) -> usize {
        self.matrices[0].n()
    }

    pub fn timestamps(&self) -> &[i64] {
        &self.timestamps
    }

    pub fn matrices(&self) -> &[TrafficDemandMatrix] {
        &self.matrices
    }

    pub fn interval_secs(&self) -> i64 {
        self.interval_secs
    }

    pub fn span(&self) -> (i64, i64) {
        (self.timestamps[0], *self.timestamps.last().unwrap())
    }

    pub fn index_of(&self, timestamp: i64) -> Option<usize> {
        self.timestamps.binary_search(&timestamp).ok()
    }

    /// The snapshot one interval before snapshot `i`, if present.
    pub fn previous(&self, i: usize) -> Option<&TrafficDemandMatrix> {
        self.index_of(self.timestamps[i] - self.interval_secs)
            .map(|p| &self.matrices[p])
    }

    /// Indices whose timestamp falls in `window` and in `[from, until)`.
    pub fn select(&self, window: Option<&TimeWindow>, from: Option<i64>, until: Option<i64>) -> Vec<usize> {
        (0..self.len())
            .filter(|&i| {
                let ts = self.timestamps[i];
                window.map_or(true, |w| w.contains(ts))
                    && from.map_or(true, |f| ts >= f)
                    && until.map_or(true, |u| ts < u)
            })
            .collect()
    }

    /// A new series holding only the given snapshots.
    pub fn subset(&self, indices: &[usize]) -> Result<Self> {
        TrafficSeries::new(
            indices.iter().map(|&i| self.timestamps[i]).collect(),
            indices.iter().map(|&i| self.matrices[i].clone()).collect(),
            self.interval_secs,
        )
    }

    /// Per-pair samples `[r(1), ..., r(t)]` over the given snapshots.
    pub fn pair_samples(&self, indices: &[usize], dest: usize, source: usize) -> Vec<f64> {
        indices.iter().map(|&i| self.matrices[i].get(dest, source)).collect()
    }
}

/// A weekly time-of-day window in UTC, half-open: `[start, end)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TimeWindow {
    pub weekday: Weekday,
    /// Minutes after midnight.
    pub start_min: u32,
    pub end_min: u32,
}

impl TimeWindow {
    /// Parses `"Wed 15:00-15:30"`.
    pub fn parse(s: &str) -> Result<Self> {
        let bad = || Error::invalid(format!("time window {s:?} is not of the form `Wed 15:00-15:30`"));
        let mut parts = s.split_whitespace();
        let day: Weekday = parts.next().ok_or_else(bad)?.parse().map_err(|_| bad())?;
        let range = parts.next().ok_or_else(bad)?;
        if parts.next().is_some() {
            return Err(bad());
        }
        let (a, b) = range.split_once('-').ok_or_else(bad)?;
        let hm = |t: &str| -> Result<u32> {
            let (h, m) = t.split_once(':').ok_or_else(bad)?;
            let h: u32 = h.parse().map_err(|_| bad())?;
            let m: u32 = m.parse().map_err(|_| bad())?;
            if h > 24 || m > 59 || h * 60 + m > 24 * 60 {
                return Err(bad());
            }
            Ok(h * 60 + m)
        };
        let (start_min, end_min) = (hm(a)?, hm(b)?);
        if end_min <= start_min {
            return Err(bad());
        }
        Ok(TimeWindow {
            weekday: day,
            start_min,
            end_min,
        })
    }

    pub fn contains(&self, unix_secs: i64) -> bool {
        let Some(t) = DateTime::from_timestamp(unix_secs, 0) else {
            return false;
        };
        let minute = t.hour() * 60 + t.minute();
        t.weekday() == self.weekday && minute >= self.start_min && minute < self.end_min
    }
}

impl std::fmt::Display for TimeWindow {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "{} {:02}:{:02}-{:02}:{:02}",
            self.weekday,
            self.start_min / 60,
            self.start_min % 60,
            self.end_min / 60,
            self.end_min % 60
        )
    }
}
