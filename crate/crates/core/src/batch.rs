//! Certified runs over batches of scenarios.
//!
//! Each run streams rounds straight from the generator into the player and the
//! certifier, so memory stays flat in `T`. Runs are independent and are spread over
//! the rayon pool when the execution mode asks for it.

use crate::aggregator::AggregatorConfig;
use crate::baselines::{Algorithm, Player};
use crate::diagnostics::{RegretReport, RunCertifier};
use crate::error::Result;
use crate::parallel::{map_slice, Execution};
use crate::scenarios::{ScenarioSpec, ScenarioStream};

#[derive(Debug, Clone)]
pub struct ScenarioRun {
    pub spec: ScenarioSpec,
    pub algorithm: Algorithm,
    pub report: RegretReport,
}

/// Generates, runs and certifies one scenario without storing the stream.
pub fn certify_scenario(spec: &ScenarioSpec, algorithm: Algorithm) -> Result<RegretReport> {
    let config =
        AggregatorConfig::new(spec.num_experts, spec.dimension)?.with_horizon(spec.rounds.max(1));
    let mut player = Player::new(algorithm, config)?;
    let mut certifier = RunCertifier::new(spec.num_experts, algorithm.certification_mode());
    for (i, round) in ScenarioStream::new(spec.clone())?.enumerate() {
        let record = player.step(&round).map_err(|e| e.at_round(i + 1))?;
        certifier.observe(&record)?;
    }
    certifier.finish()
}

/// Certifies every spec in `specs`; results keep the input order.
pub fn certify_batch(
    specs: &[ScenarioSpec],
    algorithm: Algorithm,
    exec: Execution,
) -> Vec<Result<ScenarioRun>> {
    map_slice(specs, exec, |spec| {
        certify_scenario(spec, algorithm).map(|report| ScenarioRun {
            spec: spec.clone(),
            algorithm,
            report,
        })
    })
}
