//! End-to-end steps shared by the command-line driver and the tests: fitting
//! history utilities, allocating circuits, and building per-matrix plans.

use rayon::prelude::*;

use crate::alloc::{build_problem, AllocationResult, SolveStatus, SolverTolerances};
use crate::circuits::{disaggregate, CircuitConfig, Disaggregation};
use crate::error::{Error, Result};
use crate::net::{ie_pairs, Topology, TrafficDemandMatrix, TrafficSeries};
use crate::utility::{
    degenerate_pwl, fit_concave_pwl, fit_rms, realtime_utilities, AlphaFairness, EmpiricalCdf, PairUtility,
    PwlFitParams, UtilityFamily, DEFAULT_RATE_FLOOR,
};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AllocationSettings {
    pub alpha: AlphaFairness,
    pub tolerances: SolverTolerances,
    pub disaggregation: Disaggregation,
    pub rate_floor: f64,
}

impl Default for AllocationSettings {
    fn default() -> Self {
        AllocationSettings {
            alpha: AlphaFairness::default(),
            tolerances: SolverTolerances::default(),
            disaggregation: Disaggregation::Greedy,
            rate_floor: DEFAULT_RATE_FLOOR,
        }
    }
}

/// Fit diagnostics of one IE pair.
#[derive(Debug, Clone, PartialEq)]
pub struct FitQuality {
    pub dest: usize,
    pub source: usize,
    pub samples: usize,
    pub rms: f64,
    pub breakpoints: Vec<(f64, f64)>,
    pub degenerate: bool,
}

/// Fits a concave PWL utility per IE pair from the selected snapshots.
/// Pairs with fewer than two samples fall back to the degenerate fit and are
/// flagged in the returned diagnostics.
pub fn fit_history(
    series: &TrafficSeries,
    indices: &[usize],
    params: &PwlFitParams,
    alpha: AlphaFairness,
) -> Result<(UtilityFamily, Vec<FitQuality>)> {
    if indices.is_empty() {
        let (a, b) = series.span();
        return Err(Error::Config(format!(
            "no snapshots selected for fitting; series spans {a}..={b}"
        )));
    }
    let n = series.node_count();
    let fits: Vec<Result<(PairUtility, FitQuality)>> = ie_pairs(n)
        .collect::<Vec<_>>()
        .into_par_iter()
        .map(|(k, l)| {
            let samples = series.pair_samples(indices, k, l);
            let count = samples.len();
            let cdf = EmpiricalCdf::new(samples)?;
            let (pwl, degenerate) = if count < 2 {
                (degenerate_pwl(cdf.max(), params)?, true)
            } else {
                let distinct = cdf.upper_points().len() >= 2;
                (fit_concave_pwl(&cdf, params)?, !distinct)
            };
            let quality = FitQuality {
                dest: k,
                source: l,
                samples: count,
                rms: fit_rms(&cdf, &pwl),
                breakpoints: pwl.breakpoints().to_vec(),
                degenerate,
            };
            Ok((PairUtility::Pwl(pwl), quality))
        })
        .collect();
    let mut utilities = Vec::with_capacity(fits.len());
    let mut quality = Vec::with_capacity(fits.len());
    for f in fits {
        let (u, q) = f?;
        utilities.push(u);
        quality.push(q);
    }
    Ok((UtilityFamily::new(n, alpha, utilities)?, quality))
}

/// Fit diagnostics as CSV with 1-based node indices.
pub fn write_fit_quality_csv(quality: &[FitQuality]) -> String {
    let mut out = String::from("k,l,samples,rms,degenerate,breakpoints\n");
    for q in quality {
        let bps: Vec<String> = q.breakpoints.iter().map(|(x, y)| format!("{x}:{y}")).collect();
        out.push_str(&format!(
            "{},{},{},{},{},{}\n",
            q.dest + 1,
            q.source + 1,
            q.samples,
            q.rms,
            q.degenerate as u8,
            bps.join(" ")
        ));
    }
    out
}

/// Allocation plus the circuits realizing it.
#[derive(Debug, Clone)]
pub struct CircuitAllocation {
    pub result: AllocationResult,
    pub circuits: CircuitConfig,
}

/// Solves the allocation for `family` and disaggregates it into circuits.
pub fn allocate_circuits(
    topology: &Topology,
    family: &UtilityFamily,
    settings: &AllocationSettings,
) -> Result<CircuitAllocation> {
    let problem = build_problem(topology, family, settings.alpha, settings.tolerances)?;
    let result = problem.solve()?;
    if let SolveStatus::Failed(msg) = &result.status {
        return Err(Error::Solver(msg.clone()));
    }
    let z = disaggregate(topology, &result.flows, &result.demand, settings.disaggregation, None)?;
    let circuits = CircuitConfig::from_detailed(topology, &z, &result.demand)?;
    Ok(CircuitAllocation { result, circuits })
}

/// The measured rate used for snapshot `i`: its mean with the preceding
/// snapshot when that one is in the series, otherwise the snapshot itself.
pub fn realtime_rates(series: &TrafficSeries, i: usize) -> Result<TrafficDemandMatrix> {
    let current = &series.matrices()[i];
    match series.previous(i) {
        Some(prev) => TrafficDemandMatrix::mean(prev, current),
        None => Ok(current.clone()),
    }
}

/// Real-time circuits for each test snapshot, solved in parallel. Failures are
/// kept per snapshot.
pub fn realtime_plan(
    topology: &Topology,
    series: &TrafficSeries,
    test: &[usize],
    settings: &AllocationSettings,
) -> Vec<std::result::Result<CircuitConfig, String>> {
    test.par_iter()
        .map(|&i| {
            let rates = realtime_rates(series, i)?;
            let family = realtime_utilities(&rates, settings.rate_floor, settings.alpha)?;
            Ok(allocate_circuits(topology, &family, settings)?.circuits)
        })
        .map(|r: Result<CircuitConfig>| r.map_err(|e| e.to_string()))
        .collect()
}
