//! Synthetic stand-in for the Abilene backbone and its traffic: the public
//! topology with a gravity-model demand that follows a daily cycle.

use chrono::{DateTime, Datelike, Duration, NaiveDate, Timelike, Weekday};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, LogNormal, Normal};

use crate::error::{Error, Result};
use crate::net::{Edge, MergeDirective, TimeWindow, Topology, TrafficDemandMatrix, TrafficSeries};
use crate::sim::shortest_path_tables;

pub const ABILENE_NODES: [&str; 11] = [
    "ATLA", "CHIN", "DNVR", "HSTN", "IPLS", "KSCY", "LOSA", "NYCM", "SNVA", "STTL", "WASH",
];

pub const ABILENE_LINKS: [(&str, &str); 14] = [
    ("ATLA", "HSTN"),
    ("ATLA", "IPLS"),
    ("ATLA", "WASH"),
    ("CHIN", "IPLS"),
    ("CHIN", "NYCM"),
    ("DNVR", "KSCY"),
    ("DNVR", "SNVA"),
    ("DNVR", "STTL"),
    ("HSTN", "KSCY"),
    ("HSTN", "LOSA"),
    ("IPLS", "KSCY"),
    ("LOSA", "SNVA"),
    ("NYCM", "WASH"),
    ("SNVA", "STTL"),
];

/// OC-192 payload rate in Mb/s.
pub const ABILENE_LINK_MBPS: f64 = 9920.0;

// Relative traffic mass of each city.
const GRAVITY: [f64; 11] = [1.0, 1.3, 0.6, 0.9, 0.7, 0.5, 1.4, 1.6, 1.1, 0.8, 1.2];

fn node(name: &str) -> usize {
    ABILENE_NODES.iter().position(|n| *n == name).unwrap()
}

/// The 11-node backbone, every link expanded into two directed edges.
pub fn abilene_topology() -> Topology {
    let links: Vec<(usize, usize, f64)> = ABILENE_LINKS
        .iter()
        .map(|(a, b)| (node(a), node(b), ABILENE_LINK_MBPS))
        .collect();
    Topology::bidirectional(ABILENE_NODES.iter().map(|s| s.to_string()).collect(), &links).unwrap()
}

/// The backbone plus the secondary Atlanta router `ATLA-M5` hanging off
/// `ATLA`, with the directive that folds it back in.
pub fn abilene_with_secondary_atlanta() -> (Topology, MergeDirective) {
    let base = abilene_topology();
    let mut names: Vec<String> = base.names().to_vec();
    names.push("ATLA-M5".into());
    let m5 = names.len() - 1;
    let mut edges: Vec<Edge> = base.edges().to_vec();
    edges.push(Edge::new(node("ATLA"), m5, ABILENE_LINK_MBPS));
    edges.push(Edge::new(m5, node("ATLA"), ABILENE_LINK_MBPS));
    let directive = MergeDirective::parse("merge ATLA-M5 ATLA").unwrap();
    (Topology::new(names, edges).unwrap(), directive)
}

/// Gravity-model demand with a daily sinusoid, a per-week level and
/// per-snapshot noise. Snapshots depend only on the seed and the timestamp.
#[derive(Debug, Clone, PartialEq)]
pub struct DiurnalTraffic {
    pub seed: u64,
    /// Mean demand of every IE pair at the daily mean, before pair affinity.
    base: Vec<f64>,
    pub n: usize,
    /// Relative swing of the daily cycle.
    pub amplitude: f64,
    /// Hour (UTC) of the daily peak.
    pub peak_hour: f64,
    /// Standard deviation of the multiplicative snapshot noise.
    pub noise: f64,
    /// Standard deviation of the multiplicative weekly level.
    pub weekly: f64,
}

impl DiurnalTraffic {
    /// Abilene-sized traffic scaled so that shortest-path routing loads its
    /// busiest link to `utilization` of capacity at the daily mean.
    pub fn abilene(seed: u64, utilization: f64) -> Result<Self> {
        let topology = abilene_topology();
        let n = topology.node_count();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let affinity = LogNormal::new(0.0, 0.4).unwrap();
        let mut base = vec![0.0; n * n];
        for k in 0..n {
            for l in (0..n).filter(|&l| l != k) {
                base[k * n + l] = GRAVITY[k] * GRAVITY[l] * affinity.sample(&mut rng);
            }
        }
        let mut model = DiurnalTraffic {
            seed,
            base,
            n,
            amplitude: 0.35,
            peak_hour: 20.0,
            noise: 0.06,
            weekly: 0.04,
        };
        let mean = model.mean_matrix()?;
        let routing = shortest_path_tables(&topology, None)?;
        let mut load = vec![0.0; topology.edge_count()];
        for k in 0..n {
            for l in (0..n).filter(|&l| l != k) {
                let mut at = l;
                while let Some(j) = routing.next_edge(at, k) {
                    load[j] += mean.get(k, l);
                    at = topology.edge(j).head;
                }
            }
        }
        let busiest = load.iter().cloned().fold(0.0, f64::max);
        let factor = utilization * ABILENE_LINK_MBPS / busiest;
        model.base.iter_mut().for_each(|b| *b *= factor);
        Ok(model)
    }

    /// Demand without cycle or noise.
    pub fn mean_matrix(&self) -> Result<TrafficDemandMatrix> {
        TrafficDemandMatrix::from_fn(self.n, |k, l| self.base[k * self.n + l])
    }

    fn cycle(&self, ts: i64) -> f64 {
        let t = DateTime::from_timestamp(ts, 0).unwrap_or_default();
        let hour = t.hour() as f64 + t.minute() as f64 / 60.0 + t.second() as f64 / 3600.0;
        1.0 + self.amplitude * (std::f64::consts::TAU * (hour - self.peak_hour + 6.0) / 24.0).sin()
    }

    fn week_of(ts: i64) -> i64 {
        // weeks counted from Monday 1970-01-05
        (ts - 4 * 86_400).div_euclid(7 * 86_400)
    }

    /// The snapshot at `ts`.
    pub fn matrix_at(&self, ts: i64) -> Result<TrafficDemandMatrix> {
        let n = self.n;
        let week = Self::week_of(ts);
        let mut week_rng = ChaCha8Rng::seed_from_u64(self.seed ^ (week as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15));
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed.rotate_left(17) ^ (ts as u64).wrapping_mul(0xBF58_476D_1CE4_E5B9));
        let level = Normal::new(1.0, self.weekly).unwrap();
        let jitter = Normal::new(1.0, self.noise).unwrap();
        let cycle = self.cycle(ts);
        let mut weekly = vec![0.0; n * n];
        for w in weekly.iter_mut() {
            *w = level.sample(&mut week_rng);
        }
        TrafficDemandMatrix::from_fn(n, |k, l| {
            let i = k * n + l;
            let v = self.base[i] * cycle * weekly[i] * jitter.sample(&mut rng);
            v.max(0.0)
        })
    }

    /// Snapshots at every `interval` from `start` (inclusive) to `end` (exclusive).
    pub fn series(&self, start: i64, end: i64, interval: i64) -> Result<TrafficSeries> {
        if interval <= 0 || end <= start {
            return Err(Error::invalid("empty synthetic time range"));
        }
        let ts: Vec<i64> = (start..end).step_by(interval as usize).collect();
        let mats = ts.iter().map(|&t| self.matrix_at(t)).collect::<Result<Vec<_>>>()?;
        TrafficSeries::new(ts, mats, interval)
    }
}

/// History and test snapshots for one weekly time-of-day window.
#[derive(Debug, Clone)]
pub struct SyntheticExperiment {
    pub topology: Topology,
    pub window: TimeWindow,
    /// Snapshots inside the window plus the one right before each window.
    pub series: TrafficSeries,
    pub history: Vec<usize>,
    pub test: Vec<usize>,
}

/// Seven weeks of history and two test weeks at `window`, mirroring a
/// spring 2004 measurement campaign.
pub fn abilene_experiment(seed: u64, window: &TimeWindow) -> Result<SyntheticExperiment> {
    experiment_from(&DiurnalTraffic::abilene(seed, 0.55)?, window)
}

/// First day of the synthetic test weeks; earlier snapshots are history.
pub fn test_start() -> NaiveDate {
    NaiveDate::from_ymd_opt(2004, 6, 19).unwrap()
}

/// [`abilene_experiment`] over an arbitrary traffic model.
pub fn experiment_from(traffic: &DiurnalTraffic, window: &TimeWindow) -> Result<SyntheticExperiment> {
    let history_start = NaiveDate::from_ymd_opt(2004, 5, 1).unwrap();
    let test_end = NaiveDate::from_ymd_opt(2004, 7, 3).unwrap();
    let interval = TrafficSeries::DEFAULT_INTERVAL;
    let mut stamps = Vec::new();
    let mut day = history_start;
    while day < test_end {
        if day.weekday() == window.weekday {
            let midnight = day.and_hms_opt(0, 0, 0).unwrap().and_utc().timestamp();
            let first = midnight + i64::from(window.start_min) * 60;
            let last = midnight + i64::from(window.end_min) * 60;
            let mut t = first - interval;
            while t < last {
                stamps.push(t);
                t += interval;
            }
        }
        day += Duration::days(1);
    }
    stamps.sort_unstable();
    stamps.dedup();
    let mats = stamps.iter().map(|&t| traffic.matrix_at(t)).collect::<Result<Vec<_>>>()?;
    let series = TrafficSeries::new(stamps, mats, interval)?;
    let split = test_start().and_hms_opt(0, 0, 0).unwrap().and_utc().timestamp();
    Ok(SyntheticExperiment {
        topology: abilene_topology(),
        window: *window,
        history: series.select(Some(window), None, Some(split)),
        test: series.select(Some(window), Some(split), None),
        series,
    })
}

/// Weekday helper for callers building windows programmatically.
pub fn window(weekday: Weekday, start_min: u32, end_min: u32) -> TimeWindow {
    TimeWindow {
        weekday,
        start_min,
        end_min,
    }
}
