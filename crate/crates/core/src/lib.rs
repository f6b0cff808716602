//! Online aggregation of expert predictions under quadratic loss with no a-priori
//! bound on the losses.
//!
//! The player combines `N` expert predictions in `R^D` with exponential weights whose
//! learning rate tunes itself from the observed prediction spread and loss scale.
//! Every run can be certified against the regret guarantee
//! `R_T <= 4 (2 ln N + 1) max_{t,n} l_t^n` and the intermediate inequalities behind it.

pub mod aggregator;
pub mod baselines;
pub mod batch;
pub mod diagnostics;
mod error;
pub mod io;
pub mod parallel;
pub mod rng;
pub mod scenarios;
pub mod stream;
pub mod vector;

pub use aggregator::{
    run, run_with, weights_from_losses, AggregatorConfig, AggregatorState, LearningRate,
    PredictPhase, RoundRecord,
};
pub use baselines::{
    baseline_step, run_algorithm, run_algorithm_with, Algorithm, BaselineKind, Player,
};
pub use diagnostics::{
    certify_baseline_run, certify_round, certify_run, mixloss, Check, RegretReport,
    RoundCertificate, RunCertifier,
};
pub use error::{Error, Result};
pub use parallel::Execution;
pub use scenarios::{generate, Family, ScenarioSpec, ScenarioStream};
pub use stream::{Round, Stream};
pub use vector::{convex_combine, distance, max_pairwise_distance, norm_sq, PredictionVector};
