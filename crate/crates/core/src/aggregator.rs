//! Exponential-weights aggregation with a self-tuned learning rate.
//!
//! Each round runs in two phases. [`AggregatorState::predict`] sees only the expert
//! predictions and returns the combined prediction; [`AggregatorState::update`] then
//! consumes the outcome, charges losses and advances the scale estimate.
//!
//! Per round `t` with cumulative expert losses `L` and running scale `B†`:
//!
//! ```text
//! B_t  = max(B†_{t-1}, max_{n,n'} |γ_n - γ_n'|)
//! η_t  = 1 / (2 B_t²)
//! w_n  ∝ exp(-η_t L_n)
//! γ̄_t  = Σ w_n γ_n
//! B†_t = B_t, raised to √2 · max_n √l_n when the worst expert loss exceeds B_t²
//! ```

use std::borrow::Borrow;
use std::f64::consts::SQRT_2;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::diagnostics::mixloss_at;
use crate::error::{Error, Result};
use crate::stream::Round;
use crate::vector::{convex_combine, distance_sq, max_pairwise_distance, PredictionVector};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct AggregatorConfig {
    pub num_experts: usize,
    pub dimension: usize,
    /// Game length. Accepted for completeness; the update rules never read it.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub horizon: Option<usize>,
}

impl AggregatorConfig {
    pub fn new(num_experts: usize, dimension: usize) -> Result<Self> {
        let cfg = Self {
            num_experts,
            dimension,
            horizon: None,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn with_horizon(mut self, horizon: usize) -> Self {
        self.horizon = Some(horizon);
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.num_experts == 0 {
            return Err(Error::Config("number of experts must be at least 1".into()));
        }
        if self.dimension == 0 {
            return Err(Error::Config("dimension must be at least 1".into()));
        }
        if self.horizon == Some(0) {
            return Err(Error::Config("declared horizon must be positive".into()));
        }
        Ok(())
    }
}

/// Learning rate of a round.
///
/// `Unbounded` arises only when the scale is zero: every prediction so far coincided,
/// so all cumulative losses are equal and the weights are uniform.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "LearningRateRepr", into = "LearningRateRepr")]
pub enum LearningRate {
    Finite(f64),
    Unbounded,
}

impl LearningRate {
    /// `1 / (2 B²)`, or `Unbounded` for `B = 0`.
    pub fn from_scale(scale: f64) -> Self {
        if scale > 0.0 {
            LearningRate::Finite(1.0 / (2.0 * scale * scale))
        } else {
            LearningRate::Unbounded
        }
    }

    pub fn finite(self) -> Option<f64> {
        match self {
            LearningRate::Finite(eta) => Some(eta),
            LearningRate::Unbounded => None,
        }
    }
}

impl fmt::Display for LearningRate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LearningRate::Finite(eta) => write!(f, "{eta}"),
            LearningRate::Unbounded => f.write_str("unbounded"),
        }
    }
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum LearningRateRepr {
    Finite(f64),
    Tag(String),
}

impl TryFrom<LearningRateRepr> for LearningRate {
    type Error = String;

    fn try_from(repr: LearningRateRepr) -> std::result::Result<Self, String> {
        match repr {
            LearningRateRepr::Finite(eta) if eta.is_finite() && eta >= 0.0 => {
                Ok(LearningRate::Finite(eta))
            }
            LearningRateRepr::Finite(eta) => Err(format!("invalid learning rate {eta}")),
            LearningRateRepr::Tag(s) if s == "unbounded" => Ok(LearningRate::Unbounded),
            LearningRateRepr::Tag(s) => Err(format!("unknown learning rate tag {s:?}")),
        }
    }
}

impl From<LearningRate> for LearningRateRepr {
    fn from(lr: LearningRate) -> Self {
        match lr {
            LearningRate::Finite(eta) => LearningRateRepr::Finite(eta),
            LearningRate::Unbounded => LearningRateRepr::Tag("unbounded".into()),
        }
    }
}

/// Exponential weights `w_n ∝ exp(-η L_n)`.
///
/// The minimum loss is subtracted before exponentiating, so the normalizer is at least 1
/// and never underflows. With an unbounded rate the result is uniform over the argmin.
pub fn weights_from_losses(losses: &[f64], eta: LearningRate) -> Vec<f64> {
    if losses.is_empty() {
        return Vec::new();
    }
    let min = losses.iter().copied().fold(f64::INFINITY, f64::min);
    let raw: Vec<f64> = match eta {
        LearningRate::Finite(eta) => losses.iter().map(|l| (-eta * (l - min)).exp()).collect(),
        LearningRate::Unbounded => losses
            .iter()
            .map(|&l| if l == min { 1.0 } else { 0.0 })
            .collect(),
    };
    let total: f64 = raw.iter().sum();
    raw.into_iter().map(|r| r / total).collect()
}

/// Output of the prediction phase of one round.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictPhase {
    /// 1-based index of the round this phase belongs to.
    pub round: usize,
    pub scale: f64,
    pub learning_rate: LearningRate,
    pub weights: Vec<f64>,
    pub aggregated: PredictionVector,
}

/// Complete audit record of one round.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundRecord {
    pub t: usize,
    /// `B_t`
    pub scale: f64,
    pub learning_rate: LearningRate,
    pub weights: Vec<f64>,
    pub aggregated: PredictionVector,
    pub player_loss: f64,
    pub expert_losses: Vec<f64>,
    /// `B†_t`, after the escalation step.
    pub scale_dagger: f64,
    /// Mixloss `m_t(η_t)` of the round.
    pub mixloss: f64,
}

/// Evolving memory of the aggregator.
#[derive(Debug, Clone, PartialEq)]
pub struct AggregatorState {
    config: AggregatorConfig,
    round: usize,
    scale_dagger: f64,
    cumulative_losses: Vec<f64>,
}

impl AggregatorState {
    pub fn init(config: AggregatorConfig) -> Result<Self> {
        config.validate()?;
        Ok(Self {
            config,
            round: 0,
            scale_dagger: 0.0,
            cumulative_losses: vec![0.0; config.num_experts],
        })
    }

    pub fn config(&self) -> &AggregatorConfig {
        &self.config
    }

    /// Number of completed rounds.
    pub fn round(&self) -> usize {
        self.round
    }

    pub fn scale_dagger(&self) -> f64 {
        self.scale_dagger
    }

    pub fn cumulative_losses(&self) -> &[f64] {
        &self.cumulative_losses
    }

    pub(crate) fn check_predictions(&self, predictions: &[PredictionVector]) -> Result<()> {
        check_predictions(&self.config, predictions)
    }

    pub fn predict(&self, predictions: &[PredictionVector]) -> Result<PredictPhase> {
        self.check_predictions(predictions)?;
        let diameter = max_pairwise_distance(predictions)?;
        let scale = self.scale_dagger.max(diameter);
        let learning_rate = LearningRate::from_scale(scale);
        let weights = weights_from_losses(&self.cumulative_losses, learning_rate);
        let aggregated = convex_combine(&weights, predictions)?;
        Ok(PredictPhase {
            round: self.round + 1,
            scale,
            learning_rate,
            weights,
            aggregated,
        })
    }

    pub fn update(
        &mut self,
        phase: PredictPhase,
        predictions: &[PredictionVector],
        outcome: &PredictionVector,
    ) -> Result<RoundRecord> {
        if phase.round != self.round + 1 {
            return Err(Error::Precondition(format!(
                "prediction phase is for round {}, state expects round {}",
                phase.round,
                self.round + 1
            )));
        }
        self.check_predictions(predictions)?;
        check_outcome(&self.config, outcome)?;
        let (player_loss, expert_losses) = charge_losses(&phase, predictions, outcome)?;

        let mut scale_dagger = phase.scale;
        let worst_root = expert_losses.iter().map(|l| l.sqrt()).fold(0.0, f64::max);
        if worst_root > scale_dagger {
            scale_dagger = SQRT_2 * worst_root;
        }
        for (cum, l) in self.cumulative_losses.iter_mut().zip(&expert_losses) {
            *cum += l;
        }
        self.scale_dagger = scale_dagger;
        self.round += 1;

        let mixloss = mixloss_at(&phase.weights, &expert_losses, phase.learning_rate);
        Ok(RoundRecord {
            t: phase.round,
            scale: phase.scale,
            learning_rate: phase.learning_rate,
            weights: phase.weights,
            aggregated: phase.aggregated,
            player_loss,
            expert_losses,
            scale_dagger,
            mixloss,
        })
    }

    /// Runs both phases of one round.
    pub fn step(&mut self, round: &Round) -> Result<RoundRecord> {
        let phase = self.predict(&round.predictions)?;
        self.update(phase, &round.predictions, &round.outcome)
    }
}

pub(crate) fn check_predictions(
    config: &AggregatorConfig,
    predictions: &[PredictionVector],
) -> Result<()> {
    if predictions.len() != config.num_experts {
        return Err(Error::Input(format!(
            "expected {} predictions, got {}",
            config.num_experts,
            predictions.len()
        )));
    }
    if let Some(n) = predictions.iter().position(|p| p.dim() != config.dimension) {
        return Err(Error::Input(format!(
            "prediction {} has dimension {}, expected {}",
            n + 1,
            predictions[n].dim(),
            config.dimension
        )));
    }
    Ok(())
}

pub(crate) fn check_outcome(config: &AggregatorConfig, outcome: &PredictionVector) -> Result<()> {
    if outcome.dim() != config.dimension {
        return Err(Error::Input(format!(
            "outcome has dimension {}, expected {}",
            outcome.dim(),
            config.dimension
        )));
    }
    Ok(())
}

/// Player loss `|ω - γ̄|²` and expert losses `|ω - γ_n|²`.
pub(crate) fn charge_losses(
    phase: &PredictPhase,
    predictions: &[PredictionVector],
    outcome: &PredictionVector,
) -> Result<(f64, Vec<f64>)> {
    let player = distance_sq(outcome, &phase.aggregated)?;
    let experts = predictions
        .iter()
        .map(|p| distance_sq(outcome, p))
        .collect::<Result<Vec<_>>>()?;
    Ok((player, experts))
}

/// Folds the aggregator over `rounds`, handing each record to `sink`.
pub fn run_with<I, R, F>(
    config: AggregatorConfig,
    rounds: I,
    mut sink: F,
) -> Result<AggregatorState>
where
    I: IntoIterator<Item = R>,
    R: Borrow<Round>,
    F: FnMut(RoundRecord) -> Result<()>,
{
    let mut state = AggregatorState::init(config)?;
    for (i, round) in rounds.into_iter().enumerate() {
        let record = state.step(round.borrow()).map_err(|e| e.at_round(i + 1))?;
        sink(record)?;
    }
    Ok(state)
}

pub fn run<I, R>(config: AggregatorConfig, rounds: I) -> Result<Vec<RoundRecord>>
where
    I: IntoIterator<Item = R>,
    R: Borrow<Round>,
{
    let mut records = Vec::new();
    run_with(config, rounds, |r| {
        records.push(r);
        Ok(())
    })?;
    Ok(records)
}
