//! Flat `key = value` run configuration. Keys mirror the long CLI flags.

use std::fmt::Write as _;
use std::path::PathBuf;

use anyhow::{anyhow, bail, Context, Result};
use chrono::NaiveDate;
use circalloc::alloc::SolverTolerances;
use circalloc::circuits::Disaggregation;
use circalloc::net::{MergeDirective, TimeWindow};
use circalloc::pipeline::AllocationSettings;
use circalloc::sim::{SimParams, DEFAULT_LOADS};
use circalloc::utility::{AlphaFairness, PwlFitParams};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Realtime,
    History,
}

impl Mode {
    fn name(self) -> &'static str {
        match self {
            Mode::Realtime => "realtime",
            Mode::History => "history",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub topology: Option<PathBuf>,
    pub traffic_dir: Option<PathBuf>,
    pub units_scale: f64,
    pub merge: Vec<MergeDirective>,
    pub out: PathBuf,
    pub mode: Mode,
    pub alpha: f64,
    pub segments: usize,
    pub min_slope: f64,
    pub utility_floor: f64,
    pub rate_floor: f64,
    /// Weekly time-of-day filter, e.g. `Wed 15:00-15:30`.
    pub window: Option<TimeWindow>,
    /// Snapshots before this UTC date are history, the rest are test snapshots.
    pub split: Option<NaiveDate>,
    /// Real-time allocation snapshot (unix seconds); defaults to the last one.
    pub snapshot: Option<i64>,
    pub disaggregation: Disaggregation,
    pub feasibility_tol: f64,
    pub optimality_tol: f64,
    pub max_iter: u32,
    pub utilities: Option<PathBuf>,
    pub flows: Option<PathBuf>,
    pub demand: Option<PathBuf>,
    pub circuits: Option<PathBuf>,
    pub input: Option<PathBuf>,
    pub loads: Vec<f64>,
    /// Strategy labels; empty means every series the inputs support.
    pub strategies: Vec<String>,
    pub lmax_secs: f64,
    pub buffer_secs: f64,
    pub window_slots: usize,
    pub warmup_slots: usize,
    pub measure_secs: f64,
    pub trace_load: Option<f64>,
    pub plots: bool,
    pub seed: u64,
    pub utilization: f64,
}

impl Default for RunConfig {
    fn default() -> Self {
        let sim = SimParams::default();
        let pwl = PwlFitParams::default();
        let tol = SolverTolerances::default();
        let alloc = AllocationSettings::default();
        RunConfig {
            topology: None,
            traffic_dir: None,
            units_scale: 1.0,
            merge: Vec::new(),
            out: PathBuf::from("out"),
            mode: Mode::Realtime,
            alpha: alloc.alpha.value(),
            segments: pwl.segments,
            min_slope: pwl.min_slope,
            utility_floor: pwl.floor,
            rate_floor: alloc.rate_floor,
            window: None,
            split: None,
            snapshot: None,
            disaggregation: alloc.disaggregation,
            feasibility_tol: tol.feasibility,
            optimality_tol: tol.optimality,
            max_iter: tol.max_iter,
            utilities: None,
            flows: None,
            demand: None,
            circuits: None,
            input: None,
            loads: DEFAULT_LOADS.to_vec(),
            strategies: Vec::new(),
            lmax_secs: sim.lmax_secs,
            buffer_secs: sim.buffer_secs,
            window_slots: sim.window_slots,
            warmup_slots: sim.warmup_max_slots,
            measure_secs: sim.measure_secs,
            trace_load: None,
            plots: false,
            seed: 2024,
            utilization: 0.55,
        }
    }
}

pub const KEYS: [&str; 35] = [
    "topology",
    "traffic-dir",
    "units-scale",
    "merge",
    "out",
    "mode",
    "alpha",
    "segments",
    "min-slope",
    "utility-floor",
    "rate-floor",
    "window",
    "split",
    "snapshot",
    "disaggregation",
    "feasibility-tol",
    "optimality-tol",
    "max-iter",
    "utilities",
    "flows",
    "demand",
    "circuits",
    "input",
    "loads",
    "strategies",
    "lmax-secs",
    "buffer-secs",
    "window-slots",
    "warmup-slots",
    "measure-secs",
    "trace-load",
    "plots",
    "seed",
    "utilization",
    "config-version",
];

fn num<T: std::str::FromStr>(key: &str, v: &str) -> Result<T> {
    v.parse().map_err(|_| anyhow!("{key}: cannot parse {v:?}"))
}

fn list(v: &str) -> impl Iterator<Item = &str> {
    v.split(',').map(str::trim).filter(|s| !s.is_empty())
}

impl RunConfig {
    /// Sets one key from its text form. `merge` accumulates; `merge =` clears it.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let v = value.trim();
        let path = || (!v.is_empty()).then(|| PathBuf::from(v));
        match key {
            "topology" => self.topology = path(),
            "traffic-dir" => self.traffic_dir = path(),
            "units-scale" => self.units_scale = num(key, v)?,
            "merge" => {
                if v.is_empty() {
                    self.merge.clear();
                }
                for d in list(v) {
                    self.merge.push(MergeDirective::parse(d)?);
                }
            }
            "out" => self.out = PathBuf::from(v),
            "mode" => {
                self.mode = match v.to_ascii_lowercase().as_str() {
                    "realtime" | "rt" => Mode::Realtime,
                    "history" | "hist" => Mode::History,
                    _ => bail!("mode: expected `realtime` or `history`, got {v:?}"),
                }
            }
            "alpha" => self.alpha = num(key, v)?,
            "segments" => self.segments = num(key, v)?,
            "min-slope" => self.min_slope = num(key, v)?,
            "utility-floor" => self.utility_floor = num(key, v)?,
            "rate-floor" => self.rate_floor = num(key, v)?,
            "window" => self.window = if v.is_empty() { None } else { Some(TimeWindow::parse(v)?) },
            "split" => {
                self.split = if v.is_empty() {
                    None
                } else {
                    Some(NaiveDate::parse_from_str(v, "%Y-%m-%d").with_context(|| format!("split: {v:?} is not YYYY-MM-DD"))?)
                }
            }
            "snapshot" => self.snapshot = if v.is_empty() { None } else { Some(num(key, v)?) },
            "disaggregation" => {
                self.disaggregation = match v.to_ascii_lowercase().as_str() {
                    "greedy" => Disaggregation::Greedy,
                    "proportional" => Disaggregation::Proportional,
                    _ => bail!("disaggregation: expected `greedy` or `proportional`, got {v:?}"),
                }
            }
            "feasibility-tol" => self.feasibility_tol = num(key, v)?,
            "optimality-tol" => self.optimality_tol = num(key, v)?,
            "max-iter" => self.max_iter = num(key, v)?,
            "utilities" => self.utilities = path(),
            "flows" => self.flows = path(),
            "demand" => self.demand = path(),
            "circuits" => self.circuits = path(),
            "input" => self.input = path(),
            "loads" => self.loads = list(v).map(|x| num(key, x)).collect::<Result<_>>()?,
            "strategies" => self.strategies = list(v).map(String::from).collect(),
            "lmax-secs" => self.lmax_secs = num(key, v)?,
            "buffer-secs" => self.buffer_secs = num(key, v)?,
            "window-slots" => self.window_slots = num(key, v)?,
            "warmup-slots" => self.warmup_slots = num(key, v)?,
            "measure-secs" => self.measure_secs = num(key, v)?,
            "trace-load" => self.trace_load = if v.is_empty() { None } else { Some(num(key, v)?) },
            "plots" => {
                self.plots = match v {
                    "true" | "yes" | "1" => true,
                    "false" | "no" | "0" => false,
                    _ => bail!("plots: expected true or false, got {v:?}"),
                }
            }
            "seed" => self.seed = num(key, v)?,
            "utilization" => self.utilization = num(key, v)?,
            "config-version" => {
                if v != "1" {
                    bail!("config-version {v:?} is not supported");
                }
            }
            _ => bail!("unknown configuration key {key:?}; known keys: {}", KEYS.join(", ")),
        }
        Ok(())
    }

    /// Applies a config file; `#` starts a comment.
    pub fn apply_text(&mut self, text: &str, file: &str) -> Result<()> {
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| anyhow!("{file}:{}: expected `key = value`", i + 1))?;
            self.set(k.trim(), v).with_context(|| format!("{file}:{}", i + 1))?;
        }
        Ok(())
    }

    #[cfg(test)]
    pub fn parse(text: &str, file: &str) -> Result<Self> {
        let mut c = RunConfig::default();
        c.apply_text(text, file)?;
        Ok(c)
    }

    /// Every key with its effective value. Parsing the output reproduces `self`.
    pub fn dump(&self) -> String {
        let mut out = String::from("config-version = 1\n");
        let p = |x: &Option<PathBuf>| x.as_ref().map(|p| p.display().to_string()).unwrap_or_default();
        let join = |xs: &[f64]| xs.iter().map(f64::to_string).collect::<Vec<_>>().join(",");
        let opt = |x: Option<String>| x.unwrap_or_default();
        let fields: Vec<(&str, String)> = vec![
            ("topology", p(&self.topology)),
            ("traffic-dir", p(&self.traffic_dir)),
            ("units-scale", self.units_scale.to_string()),
            ("merge", self.merge.iter().map(|m| m.to_string()).collect::<Vec<_>>().join(",")),
            ("out", self.out.display().to_string()),
            ("mode", self.mode.name().into()),
            ("alpha", self.alpha.to_string()),
            ("segments", self.segments.to_string()),
            ("min-slope", self.min_slope.to_string()),
            ("utility-floor", self.utility_floor.to_string()),
            ("rate-floor", self.rate_floor.to_string()),
            ("window", opt(self.window.map(|w| w.to_string()))),
            ("split", opt(self.split.map(|d| d.format("%Y-%m-%d").to_string()))),
            ("snapshot", opt(self.snapshot.map(|s| s.to_string()))),
            (
                "disaggregation",
                match self.disaggregation {
                    Disaggregation::Greedy => "greedy".into(),
                    Disaggregation::Proportional => "proportional".into(),
                },
            ),
            ("feasibility-tol", self.feasibility_tol.to_string()),
            ("optimality-tol", self.optimality_tol.to_string()),
            ("max-iter", self.max_iter.to_string()),
            ("utilities", p(&self.utilities)),
            ("flows", p(&self.flows)),
            ("demand", p(&self.demand)),
            ("circuits", p(&self.circuits)),
            ("input", p(&self.input)),
            ("loads", join(&self.loads)),
            ("strategies", self.strategies.join(",")),
            ("lmax-secs", self.lmax_secs.to_string()),
            ("buffer-secs", self.buffer_secs.to_string()),
            ("window-slots", self.window_slots.to_string()),
            ("warmup-slots", self.warmup_slots.to_string()),
            ("measure-secs", self.measure_secs.to_string()),
            ("trace-load", opt(self.trace_load.map(|x| x.to_string()))),
            ("plots", self.plots.to_string()),
            ("seed", self.seed.to_string()),
            ("utilization", self.utilization.to_string()),
        ];
        for (k, v) in fields {
            let _ = writeln!(out, "{k} = {v}");
        }
        out
    }

    pub fn alpha(&self) -> Result<AlphaFairness> {
        Ok(AlphaFairness::new(self.alpha)?)
    }

    pub fn pwl_params(&self) -> PwlFitParams {
        PwlFitParams {
            segments: self.segments,
            min_slope: self.min_slope,
            floor: self.utility_floor,
        }
    }

    pub fn settings(&self) -> Result<AllocationSettings> {
        Ok(AllocationSettings {
            alpha: self.alpha()?,
            tolerances: SolverTolerances {
                feasibility: self.feasibility_tol,
                optimality: self.optimality_tol,
                max_iter: self.max_iter,
            },
            disaggregation: self.disaggregation,
            rate_floor: self.rate_floor,
        })
    }

    pub fn sim_params(&self) -> SimParams {
        SimParams {
            lmax_secs: self.lmax_secs,
            buffer_secs: self.buffer_secs,
            window_slots: self.window_slots,
            warmup_max_slots: self.warmup_slots,
            measure_secs: self.measure_secs,
            ..SimParams::default()
        }
    }

    /// History mode needs a time-of-day window.
    pub fn validate(&self) -> Result<()> {
        if self.mode == Mode::History && self.window.is_none() {
            bail!("history mode needs a time-of-day window (`window = Wed 15:00-15:30`)");
        }
        if !(self.units_scale.is_finite() && self.units_scale > 0.0) {
            bail!("units-scale must be positive");
        }
        if self.loads.iter().any(|l| !(l.is_finite() && *l >= 0.0)) {
            bail!("loads must be non-negative");
        }
        Ok(())
    }

    pub fn split_timestamp(&self) -> Option<i64> {
        self.split.map(|d| d.and_hms_opt(0, 0, 0).unwrap().and_utc().timestamp())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dump_round_trips() {
        let mut c = RunConfig::default();
        c.apply_text(
            "mode = history\nwindow = Wed 15:00-15:30\nsplit = 2004-06-19\nmerge = ATLA-M5:ATLA\n\
             loads = 0.5, 1, 1.33\nalpha = 1\nplots = true\ntrace-load = 1.17\nstrategies = OSPF,HIST-OptRR\n",
            "t",
        )
        .unwrap();
        let again = RunConfig::parse(&c.dump(), "dump").unwrap();
        assert_eq!(again, c);
        assert_eq!(again.dump(), c.dump());
        assert_eq!(RunConfig::parse(&RunConfig::default().dump(), "d").unwrap(), RunConfig::default());
    }

    #[test]
    fn every_key_is_dumped() {
        let dump = RunConfig::default().dump();
        for k in KEYS {
            assert!(dump.lines().any(|l| l.starts_with(&format!("{k} ="))), "{k}");
        }
    }

    #[test]
    fn bad_values_name_the_line() {
        let err = RunConfig::parse("alpha = 2\nsegments = three\n", "run.conf").unwrap_err();
        assert!(format!("{err:#}").contains("run.conf:2"), "{err:#}");
        assert!(RunConfig::parse("colour = red\n", "f").is_err());
        assert!(RunConfig::parse("just text\n", "f").is_err());
    }

    #[test]
    fn history_needs_a_window() {
        let c = RunConfig::parse("mode = history\n", "f").unwrap();
        assert!(c.validate().is_err());
    }
}
