//! Fixtures shared by the benchmarks.

use cace_core::simulation::{complete_randomization, generate_population, observe, stream_rng};
use cace_core::{ExperimentData, PotentialPopulation, SimConfig};

pub fn population(n: usize, k: usize, seed: u64) -> (SimConfig, PotentialPopulation) {
    let cfg = SimConfig {
        n,
        k,
        p_co: 0.5,
        seed,
        ..SimConfig::default()
    };
    let pop = generate_population(&cfg, &mut stream_rng(seed, 0)).expect("feasible population");
    (cfg, pop)
}

/// One observed dataset drawn from a simulated population.
pub fn dataset(n: usize, k: usize, seed: u64) -> ExperimentData {
    let (cfg, pop) = population(n, k, seed);
    let z = complete_randomization(n, cfg.n1(), &mut stream_rng(seed, 1));
    observe(&pop, &z).expect("both arms populated")
}
