use thiserror::Error;

/// Errors produced by the aggregation library.
#[derive(Debug, Error)]
pub enum Error {
    /// Invalid run configuration (zero experts, dimension mismatch, bad scenario parameters).
    #[error("configuration error: {0}")]
    Config(String),

    /// Malformed per-round input: wrong expert count, wrong dimension, non-finite coordinate.
    #[error("input error: {0}")]
    Input(String),

    /// A numeric invariant failed beyond tolerance (e.g. weights off the simplex).
    #[error("invariant violation: {0}")]
    Invariant(String),

    /// A documented precondition of an operation was not met.
    #[error("precondition failed: {0}")]
    Precondition(String),

    /// A per-round error, tagged with the 1-based round index.
    #[error("round {round}: {source}")]
    Round {
        round: usize,
        #[source]
        source: Box<Error>,
    },

    /// Stream file or run log parse failure at a 1-based line number.
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn at_round(self, round: usize) -> Self {
        Error::Round {
            round,
            source: Box::new(self),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
