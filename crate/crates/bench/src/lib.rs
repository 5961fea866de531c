//! Shared fixtures for the benchmarks: the synthetic backbone at its usual
//! evaluation window.

use circalloc::net::{TimeWindow, Topology, TrafficDemandMatrix};
use circalloc::pipeline::{allocate_circuits, fit_history, realtime_rates, AllocationSettings};
use circalloc::circuits::CircuitConfig;
use circalloc::synth::{abilene_experiment, SyntheticExperiment};
use circalloc::utility::{realtime_utilities, AlphaFairness, PwlFitParams, UtilityFamily};

pub fn experiment() -> SyntheticExperiment {
    abilene_experiment(2024, &TimeWindow::parse("Wed 15:00-15:30").unwrap()).unwrap()
}

/// PWL utilities fitted on the history snapshots.
pub fn history_family(exp: &SyntheticExperiment, alpha: f64) -> UtilityFamily {
    let alpha = AlphaFairness::new(alpha).unwrap();
    fit_history(&exp.series, &exp.history, &PwlFitParams::default(), alpha).unwrap().0
}

/// Linear utilities from the first test snapshot.
pub fn realtime_family(exp: &SyntheticExperiment, alpha: f64) -> UtilityFamily {
    let rates = realtime_rates(&exp.series, exp.test[0]).unwrap();
    realtime_utilities(&rates, 1e-3, AlphaFairness::new(alpha).unwrap()).unwrap()
}

pub fn test_matrices(exp: &SyntheticExperiment) -> Vec<TrafficDemandMatrix> {
    exp.test.iter().map(|&i| exp.series.matrices()[i].clone()).collect()
}

pub fn circuits(topology: &Topology, family: &UtilityFamily) -> CircuitConfig {
    allocate_circuits(topology, family, &AllocationSettings::default()).unwrap().circuits
}
