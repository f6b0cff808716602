//! Reference strategies for comparison runs, and a common front end over all players.

use std::borrow::Borrow;
use std::fmt;
use std::str::FromStr;

use crate::aggregator::{
    charge_losses, check_outcome, check_predictions, weights_from_losses, AggregatorConfig,
    AggregatorState, LearningRate, PredictPhase, RoundRecord,
};
use crate::diagnostics::{mixloss_at, CertificationMode};
use crate::error::{Error, Result};
use crate::stream::Round;
use crate::vector::{convex_combine, max_pairwise_distance, PredictionVector};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BaselineKind {
    /// Exponential weights with the rate `1 / (2 B²)` fixed from an a-priori bound `B`.
    FixedBoundEw {
        bound: f64,
    },
    /// All weight on the current leader; ties go to the lowest index.
    FollowLeader,
    Uniform,
}

impl BaselineKind {
    pub fn validate(&self) -> Result<()> {
        match self {
            BaselineKind::FixedBoundEw { bound } if !(bound.is_finite() && *bound > 0.0) => Err(
                Error::Config(format!("fixed-bound weights need B > 0, got {bound}")),
            ),
            _ => Ok(()),
        }
    }

    fn learning_rate(&self) -> LearningRate {
        match *self {
            BaselineKind::FixedBoundEw { bound } => LearningRate::from_scale(bound),
            BaselineKind::FollowLeader => LearningRate::Unbounded,
            BaselineKind::Uniform => LearningRate::Finite(0.0),
        }
    }
}

/// Weights and combined prediction of one baseline round.
pub fn baseline_step(
    kind: &BaselineKind,
    cumulative_losses: &[f64],
    predictions: &[PredictionVector],
) -> Result<(Vec<f64>, PredictionVector)> {
    kind.validate()?;
    if cumulative_losses.len() != predictions.len() {
        return Err(Error::Input(format!(
            "{} cumulative losses for {} predictions",
            cumulative_losses.len(),
            predictions.len()
        )));
    }
    let n = predictions.len();
    let weights = match kind {
        BaselineKind::FixedBoundEw { .. } => {
            weights_from_losses(cumulative_losses, kind.learning_rate())
        }
        BaselineKind::FollowLeader => {
            let leader = cumulative_losses
                .iter()
                .enumerate()
                .fold(0, |best, (i, l)| {
                    if *l < cumulative_losses[best] {
                        i
                    } else {
                        best
                    }
                });
            let mut w = vec![0.0; n];
            w[leader] = 1.0;
            w
        }
        BaselineKind::Uniform => vec![1.0 / n as f64; n],
    };
    let aggregated = convex_combine(&weights, predictions)?;
    Ok((weights, aggregated))
}

/// Two-phase state for a baseline, producing records shaped like the aggregator's.
///
/// `scale` and `scale_dagger` hold the fixed bound for fixed-bound weights and the
/// round's prediction diameter otherwise. The uniform player reports a zero rate.
#[derive(Debug, Clone)]
pub struct BaselineState {
    kind: BaselineKind,
    config: AggregatorConfig,
    round: usize,
    cumulative_losses: Vec<f64>,
}

impl BaselineState {
    pub fn init(kind: BaselineKind, config: AggregatorConfig) -> Result<Self> {
        kind.validate()?;
        config.validate()?;
        Ok(Self {
            kind,
            config,
            round: 0,
            cumulative_losses: vec![0.0; config.num_experts],
        })
    }

    pub fn cumulative_losses(&self) -> &[f64] {
        &self.cumulative_losses
    }

    pub fn predict(&self, predictions: &[PredictionVector]) -> Result<PredictPhase> {
        check_predictions(&self.config, predictions)?;
        let (weights, aggregated) =
            baseline_step(&self.kind, &self.cumulative_losses, predictions)?;
        let scale = match self.kind {
            BaselineKind::FixedBoundEw { bound } => bound,
            _ => max_pairwise_distance(predictions)?,
        };
        Ok(PredictPhase {
            round: self.round + 1,
            scale,
            learning_rate: self.kind.learning_rate(),
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
        check_predictions(&self.config, predictions)?;
        check_outcome(&self.config, outcome)?;
        let (player_loss, expert_losses) = charge_losses(&phase, predictions, outcome)?;
        for (cum, l) in self.cumulative_losses.iter_mut().zip(&expert_losses) {
            *cum += l;
        }
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
            scale_dagger: phase.scale,
            mixloss,
        })
    }
}

/// Strategy selector, spelled `paper`, `fixed-ew:<B>`, `ftl` or `uniform` on the command line.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Algorithm {
    /// The self-tuned exponential-weights aggregator.
    Paper,
    Baseline(BaselineKind),
}

impl Algorithm {
    pub fn certification_mode(&self) -> CertificationMode {
        match self {
            Algorithm::Paper => CertificationMode::Full,
            Algorithm::Baseline(_) => CertificationMode::Reduced,
        }
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Algorithm::Paper => f.write_str("paper"),
            Algorithm::Baseline(BaselineKind::FixedBoundEw { bound }) => {
                write!(f, "fixed-ew:{bound:?}")
            }
            Algorithm::Baseline(BaselineKind::FollowLeader) => f.write_str("ftl"),
            Algorithm::Baseline(BaselineKind::Uniform) => f.write_str("uniform"),
        }
    }
}

impl FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let algo = match s {
            "paper" => Algorithm::Paper,
            "ftl" => Algorithm::Baseline(BaselineKind::FollowLeader),
            "uniform" => Algorithm::Baseline(BaselineKind::Uniform),
            _ => {
                let bound = s
                    .strip_prefix("fixed-ew:")
                    .ok_or_else(|| Error::Config(format!("unknown algorithm {s:?}")))?;
                let bound: f64 = bound
                    .parse()
                    .map_err(|_| Error::Config(format!("bad bound in {s:?}")))?;
                let kind = BaselineKind::FixedBoundEw { bound };
                kind.validate()?;
                Algorithm::Baseline(kind)
            }
        };
        Ok(algo)
    }
}

/// Any strategy behind a single two-phase interface.
#[derive(Debug, Clone)]
pub enum Player {
    Paper(AggregatorState),
    Baseline(BaselineState),
}

impl Player {
    pub fn new(algorithm: Algorithm, config: AggregatorConfig) -> Result<Self> {
        Ok(match algorithm {
            Algorithm::Paper => Player::Paper(AggregatorState::init(config)?),
            Algorithm::Baseline(kind) => Player::Baseline(BaselineState::init(kind, config)?),
        })
    }

    pub fn predict(&self, predictions: &[PredictionVector]) -> Result<PredictPhase> {
        match self {
            Player::Paper(s) => s.predict(predictions),
            Player::Baseline(s) => s.predict(predictions),
        }
    }

    pub fn update(
        &mut self,
        phase: PredictPhase,
        predictions: &[PredictionVector],
        outcome: &PredictionVector,
    ) -> Result<RoundRecord> {
        match self {
            Player::Paper(s) => s.update(phase, predictions, outcome),
            Player::Baseline(s) => s.update(phase, predictions, outcome),
        }
    }

    pub fn step(&mut self, round: &Round) -> Result<RoundRecord> {
        let phase = self.predict(&round.predictions)?;
        self.update(phase, &round.predictions, &round.outcome)
    }
}

/// Runs any strategy over `rounds`, handing each record to `sink`.
pub fn run_algorithm_with<I, R, F>(
    algorithm: Algorithm,
    config: AggregatorConfig,
    rounds: I,
    mut sink: F,
) -> Result<()>
where
    I: IntoIterator<Item = R>,
    R: Borrow<Round>,
    F: FnMut(RoundRecord) -> Result<()>,
{
    let mut player = Player::new(algorithm, config)?;
    for (i, round) in rounds.into_iter().enumerate() {
        let record = player.step(round.borrow()).map_err(|e| e.at_round(i + 1))?;
        sink(record)?;
    }
    Ok(())
}

pub fn run_algorithm<I, R>(
    algorithm: Algorithm,
    config: AggregatorConfig,
    rounds: I,
) -> Result<Vec<RoundRecord>>
where
    I: IntoIterator<Item = R>,
    R: Borrow<Round>,
{
    let mut out = Vec::new();
    run_algorithm_with(algorithm, config, rounds, |r| {
        out.push(r);
        Ok(())
    })?;
    Ok(out)
}
