//! Finite-dimensional Hilbert-space kernel.
//!
//! Every quantity is an `f64`; the certificate tolerances in [`crate::diagnostics`]
//! are calibrated to double precision.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::parallel::Execution;

/// Absolute tolerance on `|sum(w) - 1|` for simplex weights.
pub const SIMPLEX_TOL: f64 = 1e-9;

/// Negative weights no smaller than this are treated as rounding dust and clamped to zero.
pub const NEGATIVE_DUST: f64 = 1e-12;

/// Expert count from which the pairwise scan is split across threads.
pub const PARALLEL_PAIRWISE_MIN_EXPERTS: usize = 128;

/// A point of `R^D` with finite coordinates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct PredictionVector(Vec<f64>);

impl PredictionVector {
    pub fn new(coords: Vec<f64>) -> Result<Self> {
        if coords.is_empty() {
            return Err(Error::Input("vector has no coordinates".into()));
        }
        if let Some(i) = coords.iter().position(|c| !c.is_finite()) {
            return Err(Error::Input(format!(
                "coordinate {i} is not finite ({})",
                coords[i]
            )));
        }
        Ok(Self(coords))
    }

    pub fn zeros(dim: usize) -> Self {
        Self(vec![0.0; dim])
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    /// Returns `self + shift`, coordinatewise.
    pub fn translated(&self, shift: &PredictionVector) -> Result<Self> {
        check_same_dim(self, shift)?;
        Self::new(self.0.iter().zip(&shift.0).map(|(a, b)| a + b).collect())
    }

    pub fn scaled(&self, factor: f64) -> Result<Self> {
        Self::new(self.0.iter().map(|a| a * factor).collect())
    }
}

impl TryFrom<Vec<f64>> for PredictionVector {
    type Error = Error;

    fn try_from(coords: Vec<f64>) -> Result<Self> {
        Self::new(coords)
    }
}

impl From<PredictionVector> for Vec<f64> {
    fn from(v: PredictionVector) -> Self {
        v.0
    }
}

impl AsRef<[f64]> for PredictionVector {
    fn as_ref(&self) -> &[f64] {
        &self.0
    }
}

fn check_same_dim(u: &PredictionVector, v: &PredictionVector) -> Result<()> {
    if u.dim() != v.dim() {
        return Err(Error::Config(format!(
            "dimension mismatch: {} vs {}",
            u.dim(),
            v.dim()
        )));
    }
    Ok(())
}

/// Squared Euclidean norm.
pub fn norm_sq(v: &PredictionVector) -> f64 {
    v.0.iter().map(|c| c * c).sum()
}

/// `||u - v||^2`, evaluated as `norm_sq` of the difference without allocating it.
pub fn distance_sq(u: &PredictionVector, v: &PredictionVector) -> Result<f64> {
    check_same_dim(u, v)?;
    Ok(raw_distance_sq(&u.0, &v.0))
}

#[inline]
fn raw_distance_sq(u: &[f64], v: &[f64]) -> f64 {
    u.iter()
        .zip(v)
        .map(|(a, b)| {
            let d = a - b;
            d * d
        })
        .sum()
}

pub fn distance(u: &PredictionVector, v: &PredictionVector) -> Result<f64> {
    distance_sq(u, v).map(f64::sqrt)
}

fn check_uniform_dim(vectors: &[PredictionVector]) -> Result<usize> {
    let first = vectors
        .first()
        .ok_or_else(|| Error::Precondition("empty vector sequence".into()))?;
    let dim = first.dim();
    if let Some(v) = vectors.iter().find(|v| v.dim() != dim) {
        return Err(Error::Config(format!(
            "dimension mismatch: {} vs {}",
            dim,
            v.dim()
        )));
    }
    Ok(dim)
}

/// Exact diameter of a finite point set: the maximum distance over all unordered pairs.
///
/// The scan is exhaustive, `O(N^2 D)`. The maximum is taken over squared distances and
/// the root is applied once, which gives the same value as maximizing the roots since
/// `sqrt` is monotone and correctly rounded.
pub fn max_pairwise_distance(vectors: &[PredictionVector]) -> Result<f64> {
    max_pairwise_distance_with(vectors, Execution::default())
}

/// [`max_pairwise_distance`] with an explicit execution mode.
///
/// `max` is exact in floating point, so both modes return bitwise-identical results.
pub fn max_pairwise_distance_with(vectors: &[PredictionVector], exec: Execution) -> Result<f64> {
    check_uniform_dim(vectors)?;
    let row_max = |i: usize| -> f64 {
        let u = &vectors[i].0;
        vectors[i + 1..]
            .iter()
            .map(|v| raw_distance_sq(u, &v.0))
            .fold(0.0, f64::max)
    };
    let n = vectors.len();
    let best = if exec.is_parallel() && n >= PARALLEL_PAIRWISE_MIN_EXPERTS {
        crate::parallel::par_max_over(0..n, row_max)
    } else {
        (0..n).map(row_max).fold(0.0, f64::max)
    };
    Ok(best.sqrt())
}

/// Checks `weights` against the probability simplex, clamping rounding dust.
///
/// Accepts `w >= -1e-12` per coordinate (negatives are clamped to 0) and
/// `|sum(w) - 1| <= 1e-9`.
pub fn validate_simplex(weights: &[f64]) -> Result<Vec<f64>> {
    let mut out = Vec::with_capacity(weights.len());
    for (i, &w) in weights.iter().enumerate() {
        if !w.is_finite() || w < -NEGATIVE_DUST {
            return Err(Error::Invariant(format!(
                "weight {i} is {w}, not on the simplex"
            )));
        }
        out.push(w.max(0.0));
    }
    let sum: f64 = out.iter().sum();
    if (sum - 1.0).abs() > SIMPLEX_TOL {
        return Err(Error::Invariant(format!(
            "weights sum to {sum}, off the simplex by more than {SIMPLEX_TOL}"
        )));
    }
    Ok(out)
}

/// `sum_n weights[n] * vectors[n]`.
pub fn convex_combine(weights: &[f64], vectors: &[PredictionVector]) -> Result<PredictionVector> {
    if weights.len() != vectors.len() {
        return Err(Error::Input(format!(
            "{} weights for {} vectors",
            weights.len(),
            vectors.len()
        )));
    }
    let dim = check_uniform_dim(vectors)?;
    let weights = validate_simplex(weights)?;
    let mut acc = vec![0.0; dim];
    for (w, v) in weights.iter().zip(vectors) {
        if *w == 0.0 {
            continue;
        }
        for (a, c) in acc.iter_mut().zip(&v.0) {
            *a += w * c;
        }
    }
    PredictionVector::new(acc)
}
