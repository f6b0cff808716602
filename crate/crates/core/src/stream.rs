use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::vector::PredictionVector;

/// One round of the game: the experts' predictions followed by the revealed outcome.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Round {
    pub predictions: Vec<PredictionVector>,
    pub outcome: PredictionVector,
}

impl Round {
    pub fn new(predictions: Vec<PredictionVector>, outcome: PredictionVector) -> Self {
        Self {
            predictions,
            outcome,
        }
    }

    /// Convenience constructor from raw coordinates.
    pub fn from_coords(predictions: &[&[f64]], outcome: &[f64]) -> Result<Self> {
        let predictions = predictions
            .iter()
            .map(|p| PredictionVector::new(p.to_vec()))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self::new(
            predictions,
            PredictionVector::new(outcome.to_vec())?,
        ))
    }

    pub(crate) fn check_shape(&self, num_experts: usize, dimension: usize) -> Result<()> {
        if self.predictions.len() != num_experts {
            return Err(Error::Input(format!(
                "expected {num_experts} predictions, got {}",
                self.predictions.len()
            )));
        }
        if let Some(n) = self.predictions.iter().position(|p| p.dim() != dimension) {
            return Err(Error::Input(format!(
                "prediction {} has dimension {}, expected {dimension}",
                n + 1,
                self.predictions[n].dim()
            )));
        }
        if self.outcome.dim() != dimension {
            return Err(Error::Input(format!(
                "outcome has dimension {}, expected {dimension}",
                self.outcome.dim()
            )));
        }
        Ok(())
    }
}

/// A finite game transcript with fixed expert count and dimension.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Stream {
    num_experts: usize,
    dimension: usize,
    rounds: Vec<Round>,
}

impl Stream {
    pub fn new(num_experts: usize, dimension: usize, rounds: Vec<Round>) -> Result<Self> {
        if num_experts == 0 || dimension == 0 {
            return Err(Error::Config(format!(
                "stream needs N >= 1 and D >= 1 (got N={num_experts}, D={dimension})"
            )));
        }
        for (i, r) in rounds.iter().enumerate() {
            r.check_shape(num_experts, dimension)
                .map_err(|e| e.at_round(i + 1))?;
        }
        Ok(Self {
            num_experts,
            dimension,
            rounds,
        })
    }

    pub fn num_experts(&self) -> usize {
        self.num_experts
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn len(&self) -> usize {
        self.rounds.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rounds.is_empty()
    }

    pub fn rounds(&self) -> &[Round] {
        &self.rounds
    }

    pub fn into_rounds(self) -> Vec<Round> {
        self.rounds
    }
}
