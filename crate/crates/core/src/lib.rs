//! Estimation and inference for the sample complier average causal effect
//! in completely randomized experiments with noncompliance.
//!
//! The crate provides the Wald and regression-adjusted point estimators,
//! the test-inversion (`wald-ld`), delta-method (`wald-delta`) and
//! sandwich (`reg-ehw`, `reg-hc2`, `reg-hc3`) confidence sets, and a
//! finite-population Monte Carlo engine.

pub mod data;
pub mod error;
pub mod estimators;
pub mod intervals;
pub mod linalg;
pub mod simulation;

pub use data::{CovariateSelection, ExperimentData};
pub use error::{CaceError, Result};
pub use estimators::{reg_estimate, true_sample_cace, wald_estimate, Estimator, PointEstimate};
pub use intervals::{
    interval, normal_quantile, reg_intervals, wald_delta_interval, wald_ld_set, ConfidenceSet,
    HcFlavor, IntervalMethod, IntervalReport, SetShape,
};
pub use linalg::{ols, DesignMatrix, OlsFit, QrFactor};
pub use simulation::{
    complete_randomization, generate_population, observe, run_study, run_study_with, Diagnostics,
    Group, MethodSummary, PotentialPopulation, SimConfig, SimulationSummary, StudyOutput,
};
