//! Seeded synthetic expert/outcome streams.
//!
//! All families share a smooth target path
//! `τ_t[d] = sin(2π t / 64 + 0.9 d) + 0.5 cos(2π t / 23 + 0.3 d)` (t is 1-based).
//! Expert `n` has a noise level `σ_n`, either the explicit `sigmas` list or
//! `σ · (n + 1)`.
//!
//! - `noisy-regression`: `ω_t = τ_t`, `γ_n = τ_t + σ_n z`.
//! - `drifting-leader`: as above, but the noise levels are rotated so the expert with
//!   the lowest level changes every `period` rounds (leader `((t - 1) / period) mod N`).
//! - `scale-burst`: as `noisy-regression`, except that with probability `p` the outcome
//!   is `M τ_t`. The burst decision comes first in each round and is drawn from a
//!   second generator seeded with `seed ^ BURST_STREAM_SALT`, so `p = 0` reproduces
//!   `noisy-regression` exactly.
//! - `density-grid`: Gaussian bumps of width `bandwidth` evaluated at the `D` cell
//!   midpoints of `[0, 1]` and scaled to unit Euclidean norm (the discretized L² norm).
//!   The outcome bump is centred at `0.5 + 0.3 sin(2π t / 64)`; expert `n` shifts the
//!   centre by `σ_n · bandwidth · z`.
//!
//! Within a round, Gaussian draws are taken expert by expert, coordinate by coordinate
//! (one draw per expert for `density-grid`).

use std::f64::consts::TAU;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::SplitMix64;
use crate::stream::{Round, Stream};
use crate::vector::PredictionVector;

pub const BURST_STREAM_SALT: u64 = 0xB0B5_7B0B_5CA1_EB0B;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Family {
    NoisyRegression,
    DriftingLeader,
    ScaleBurst,
    DensityGrid,
}

impl Family {
    pub const ALL: [Family; 4] = [
        Family::NoisyRegression,
        Family::DriftingLeader,
        Family::ScaleBurst,
        Family::DensityGrid,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Family::NoisyRegression => "noisy-regression",
            Family::DriftingLeader => "drifting-leader",
            Family::ScaleBurst => "scale-burst",
            Family::DensityGrid => "density-grid",
        }
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Family {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let norm = s.trim().to_ascii_lowercase().replace('_', "-");
        Family::ALL
            .into_iter()
            .find(|f| f.name() == norm)
            .ok_or_else(|| Error::Config(format!("unknown scenario family {s:?}")))
    }
}

/// Declarative description of a synthetic stream.
///
/// The string form is a comma-separated `key=value` list, e.g.
/// `family=scale-burst,n=10,t=1000,d=4,seed=7,p=0.05,burst=100`. Keys:
///
/// | key | meaning | default |
/// |-----|---------|---------|
/// | `family` | `noisy-regression`, `drifting-leader`, `scale-burst`, `density-grid` | required |
/// | `n`, `t`, `d` | experts, rounds, dimension | 5, 100, 1 |
/// | `seed` | 64-bit seed | 0 |
/// | `sigma` | base noise level, > 0 | 1 |
/// | `sigmas` | explicit per-expert levels, `:`-separated, >= 0 | unset |
/// | `burst` | burst magnitude M, > 0 | 100 |
/// | `p` | burst probability in [0, 1] | 0.05 |
/// | `period` | leader rotation period, >= 1 | 50 |
/// | `bandwidth` | bump width for density grids, > 0 | 0.1 |
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSpec {
    pub family: Family,
    pub num_experts: usize,
    pub rounds: usize,
    pub dimension: usize,
    pub seed: u64,
    pub sigma: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub expert_sigmas: Option<Vec<f64>>,
    pub burst_magnitude: f64,
    pub burst_prob: f64,
    pub drift_period: usize,
    pub bandwidth: f64,
}

impl ScenarioSpec {
    pub fn new(
        family: Family,
        num_experts: usize,
        rounds: usize,
        dimension: usize,
        seed: u64,
    ) -> Self {
        Self {
            family,
            num_experts,
            rounds,
            dimension,
            seed,
            sigma: 1.0,
            expert_sigmas: None,
            burst_magnitude: 100.0,
            burst_prob: 0.05,
            drift_period: 50,
            bandwidth: 0.1,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if self.num_experts == 0 || self.dimension == 0 {
            return bad(format!(
                "scenario needs n >= 1 and d >= 1 (got n={}, d={})",
                self.num_experts, self.dimension
            ));
        }
        if !(self.sigma.is_finite() && self.sigma > 0.0) {
            return bad(format!("sigma must be positive, got {}", self.sigma));
        }
        if let Some(s) = &self.expert_sigmas {
            if s.len() != self.num_experts {
                return bad(format!(
                    "{} sigmas given for {} experts",
                    s.len(),
                    self.num_experts
                ));
            }
            if s.iter().any(|x| !(x.is_finite() && *x >= 0.0)) {
                return bad("per-expert sigmas must be finite and nonnegative".into());
            }
        }
        if !(self.burst_magnitude.is_finite() && self.burst_magnitude > 0.0) {
            return bad(format!(
                "burst magnitude must be positive, got {}",
                self.burst_magnitude
            ));
        }
        if !(0.0..=1.0).contains(&self.burst_prob) {
            return bad(format!(
                "burst probability must lie in [0, 1], got {}",
                self.burst_prob
            ));
        }
        if self.drift_period == 0 {
            return bad("drift period must be at least 1".into());
        }
        if !(self.bandwidth.is_finite() && self.bandwidth > 0.0) {
            return bad(format!(
                "bandwidth must be positive, got {}",
                self.bandwidth
            ));
        }
        Ok(())
    }

    fn expert_sigma(&self, n: usize) -> f64 {
        match &self.expert_sigmas {
            Some(s) => s[n],
            None => self.sigma * (n + 1) as f64,
        }
    }
}

impl fmt::Display for ScenarioSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "family={},n={},t={},d={},seed={},sigma={:?},burst={:?},p={:?},period={},bandwidth={:?}",
            self.family,
            self.num_experts,
            self.rounds,
            self.dimension,
            self.seed,
            self.sigma,
            self.burst_magnitude,
            self.burst_prob,
            self.drift_period,
            self.bandwidth
        )?;
        if let Some(s) = &self.expert_sigmas {
            let list: Vec<String> = s.iter().map(|x| format!("{x:?}")).collect();
            write!(f, ",sigmas={}", list.join(":"))?;
        }
        Ok(())
    }
}

impl FromStr for ScenarioSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        fn num<T: FromStr>(key: &str, v: &str) -> Result<T> {
            v.parse()
                .map_err(|_| Error::Config(format!("bad value {v:?} for scenario key {key:?}")))
        }

        let mut family = None;
        let mut spec = ScenarioSpec::new(Family::NoisyRegression, 5, 100, 1, 0);
        for item in s.split(',').map(str::trim).filter(|i| !i.is_empty()) {
            let (key, value) = item
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("expected key=value, got {item:?}")))?;
            let key = key.trim().to_ascii_lowercase();
            let value = value.trim();
            match key.as_str() {
                "family" => family = Some(value.parse()?),
                "n" => spec.num_experts = num(&key, value)?,
                "t" => spec.rounds = num(&key, value)?,
                "d" => spec.dimension = num(&key, value)?,
                "seed" => spec.seed = num(&key, value)?,
                "sigma" => spec.sigma = num(&key, value)?,
                "sigmas" => {
                    spec.expert_sigmas = Some(
                        value
                            .split(':')
                            .map(|v| num(&key, v.trim()))
                            .collect::<Result<Vec<f64>>>()?,
                    )
                }
                "burst" => spec.burst_magnitude = num(&key, value)?,
                "p" => spec.burst_prob = num(&key, value)?,
                "period" => spec.drift_period = num(&key, value)?,
                "bandwidth" => spec.bandwidth = num(&key, value)?,
                _ => return Err(Error::Config(format!("unknown scenario key {key:?}"))),
            }
        }
        spec.family = family.ok_or_else(|| Error::Config("scenario is missing family=".into()))?;
        spec.validate()?;
        Ok(spec)
    }
}

fn target(t: usize, dimension: usize) -> Vec<f64> {
    let t = t as f64;
    (0..dimension)
        .map(|d| {
            let d = d as f64;
            (TAU * t / 64.0 + 0.9 * d).sin() + 0.5 * (TAU * t / 23.0 + 0.3 * d).cos()
        })
        .collect()
}

fn bump(center: f64, bandwidth: f64, dimension: usize) -> Vec<f64> {
    let mut cells: Vec<f64> = (0..dimension)
        .map(|i| {
            let x = (i as f64 + 0.5) / dimension as f64;
            let z = (x - center) / bandwidth;
            (-0.5 * z * z).exp()
        })
        .collect();
    let norm = cells.iter().map(|c| c * c).sum::<f64>().sqrt();
    if norm > 0.0 {
        cells.iter_mut().for_each(|c| *c /= norm);
    } else {
        // bump entirely off the grid: fall back to the flat density
        let flat = 1.0 / (dimension as f64).sqrt();
        cells.iter_mut().for_each(|c| *c = flat);
    }
    cells
}

/// Lazy round-by-round generator for a [`ScenarioSpec`].
#[derive(Debug, Clone)]
pub struct ScenarioStream {
    spec: ScenarioSpec,
    noise: SplitMix64,
    bursts: SplitMix64,
    next_t: usize,
}

impl ScenarioStream {
    pub fn new(spec: ScenarioSpec) -> Result<Self> {
        spec.validate()?;
        Ok(Self {
            noise: SplitMix64::new(spec.seed),
            bursts: SplitMix64::new(spec.seed ^ BURST_STREAM_SALT),
            spec,
            next_t: 1,
        })
    }

    pub fn spec(&self) -> &ScenarioSpec {
        &self.spec
    }

    fn sigma_at(&self, n: usize, t: usize) -> f64 {
        match self.spec.family {
            Family::DriftingLeader => {
                let n_exp = self.spec.num_experts;
                let leader = ((t - 1) / self.spec.drift_period) % n_exp;
                self.spec.expert_sigma((n + n_exp - leader) % n_exp)
            }
            _ => self.spec.expert_sigma(n),
        }
    }

    fn make_round(&mut self, t: usize) -> Round {
        let spec = &self.spec;
        let dim = spec.dimension;
        let burst = spec.family == Family::ScaleBurst && self.bursts.uniform() < spec.burst_prob;

        let (predictions, outcome) = if spec.family == Family::DensityGrid {
            let center = 0.5 + 0.3 * (TAU * t as f64 / 64.0).sin();
            let bandwidth = spec.bandwidth;
            let preds: Vec<Vec<f64>> = (0..spec.num_experts)
                .map(|n| {
                    let shift = self.sigma_at(n, t) * bandwidth * self.noise.normal();
                    bump(center + shift, bandwidth, dim)
                })
                .collect();
            (preds, bump(center, bandwidth, dim))
        } else {
            let tau = target(t, dim);
            let preds: Vec<Vec<f64>> = (0..spec.num_experts)
                .map(|n| {
                    let sigma = self.sigma_at(n, t);
                    tau.iter()
                        .map(|c| c + sigma * self.noise.normal())
                        .collect()
                })
                .collect();
            let scale = if burst {
                self.spec.burst_magnitude
            } else {
                1.0
            };
            let outcome = tau.iter().map(|c| c * scale).collect();
            (preds, outcome)
        };

        let to_vec =
            |c: Vec<f64>| PredictionVector::new(c).expect("generated coordinates are finite");
        Round::new(
            predictions.into_iter().map(to_vec).collect(),
            to_vec(outcome),
        )
    }
}

impl Iterator for ScenarioStream {
    type Item = Round;

    fn next(&mut self) -> Option<Round> {
        if self.next_t > self.spec.rounds {
            return None;
        }
        let t = self.next_t;
        self.next_t += 1;
        Some(self.make_round(t))
    }

    fn size_hint(&self) -> (usize, Option<usize>) {
        let left = self.spec.rounds + 1 - self.next_t;
        (left, Some(left))
    }
}

impl ExactSizeIterator for ScenarioStream {}

/// Materializes the whole stream for `spec`.
pub fn generate(spec: &ScenarioSpec) -> Result<Stream> {
    let rounds: Vec<Round> = ScenarioStream::new(spec.clone())?.collect();
    Stream::new(spec.num_experts, spec.dimension, rounds)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::aggregator::{run, AggregatorConfig};
    use crate::diagnostics::certify_run;

    fn spec(family: Family) -> ScenarioSpec {
        ScenarioSpec::new(family, 4, 60, 3, 11)
    }

    #[test]
    fn deterministic() {
        for f in Family::ALL {
            assert_eq!(generate(&spec(f)).unwrap(), generate(&spec(f)).unwrap());
        }
    }

    #[test]
    fn seeds_differ() {
        let a = generate(&spec(Family::NoisyRegression)).unwrap();
        let mut s = spec(Family::NoisyRegression);
        s.seed += 1;
        assert_ne!(a, generate(&s).unwrap());
    }

    #[test]
    fn burst_free_reduces_to_noisy_regression() {
        let mut burst = spec(Family::ScaleBurst);
        burst.burst_prob = 0.0;
        assert_eq!(
            generate(&burst).unwrap().rounds(),
            generate(&spec(Family::NoisyRegression)).unwrap().rounds()
        );
    }

    #[test]
    fn bursts_scale_the_outcome() {
        let mut burst = spec(Family::ScaleBurst);
        burst.burst_prob = 1.0;
        burst.burst_magnitude = 7.0;
        let plain = generate(&spec(Family::NoisyRegression)).unwrap();
        let scaled = generate(&burst).unwrap();
        for (a, b) in plain.rounds().iter().zip(scaled.rounds()) {
            assert_eq!(a.predictions, b.predictions);
            for (x, y) in a.outcome.as_slice().iter().zip(b.outcome.as_slice()) {
                assert_eq!(x * 7.0, *y);
            }
        }
    }

    #[test]
    fn shapes_and_finiteness() {
        for f in Family::ALL {
            let s = spec(f);
            let stream = generate(&s).unwrap();
            assert_eq!(stream.len(), s.rounds);
            for r in stream.rounds() {
                assert_eq!(r.predictions.len(), s.num_experts);
                assert!(r.predictions.iter().all(|p| p.dim() == s.dimension));
                assert_eq!(r.outcome.dim(), s.dimension);
                assert!(r.outcome.as_slice().iter().all(|c| c.is_finite()));
            }
        }
    }

    #[test]
    fn density_grid_is_nonnegative_unit_norm() {
        let stream = generate(&ScenarioSpec::new(Family::DensityGrid, 5, 40, 16, 3)).unwrap();
        for r in stream.rounds() {
            for v in r.predictions.iter().chain(std::iter::once(&r.outcome)) {
                assert!(v.as_slice().iter().all(|c| *c >= 0.0));
                assert!((crate::vector::norm_sq(v) - 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn drifting_leader_rotates() {
        let mut s = ScenarioSpec::new(Family::DriftingLeader, 3, 9, 1, 5);
        s.drift_period = 3;
        s.expert_sigmas = Some(vec![0.0, 1.0, 2.0]);
        let stream = generate(&s).unwrap();
        for (i, r) in stream.rounds().iter().enumerate() {
            let leader = i / 3 % 3;
            assert_eq!(r.predictions[leader], r.outcome);
        }
    }

    #[test]
    fn zero_noise_expert_has_zero_loss() {
        let mut s = ScenarioSpec::new(Family::NoisyRegression, 3, 200, 2, 9);
        s.expert_sigmas = Some(vec![0.0, 1.0, 3.0]);
        let stream = generate(&s).unwrap();
        let records = run(AggregatorConfig::new(3, 2).unwrap(), stream.rounds()).unwrap();
        let report = certify_run(&records, 3).unwrap();
        assert_eq!(report.best_expert_loss, 0.0);
        assert_eq!(report.best_expert_index, 1);
        assert!(report.regret >= 0.0);
        assert_eq!(report.regret, report.total_player_loss);
        assert!(report.all_passed);
    }

    #[test]
    fn spec_string_round_trip() {
        let s: ScenarioSpec = "family=scale-burst,n=10,t=1000,d=4,seed=7,p=0.25,burst=50"
            .parse()
            .unwrap();
        assert_eq!(s.family, Family::ScaleBurst);
        assert_eq!(
            (s.num_experts, s.rounds, s.dimension, s.seed),
            (10, 1000, 4, 7)
        );
        assert_eq!((s.burst_prob, s.burst_magnitude), (0.25, 50.0));
        assert_eq!(s.to_string().parse::<ScenarioSpec>().unwrap(), s);

        let s: ScenarioSpec = "family=NOISY_REGRESSION, N=3, sigmas=0:1.5:2"
            .parse()
            .unwrap();
        assert_eq!(s.family, Family::NoisyRegression);
        assert_eq!(s.expert_sigmas, Some(vec![0.0, 1.5, 2.0]));
        assert_eq!(s.to_string().parse::<ScenarioSpec>().unwrap(), s);
    }

    #[test]
    fn spec_string_errors() {
        for bad in [
            "n=3",
            "family=unknown",
            "family=scale-burst,p=1.5",
            "family=noisy-regression,sigma=0",
            "family=noisy-regression,n=0",
            "family=drifting-leader,period=0",
            "family=noisy-regression,n=2,sigmas=1",
            "family=noisy-regression,colour=red",
            "family=noisy-regression,n",
            "family=noisy-regression,seed=-1",
        ] {
            assert!(
                matches!(bad.parse::<ScenarioSpec>(), Err(Error::Config(_))),
                "{bad}"
            );
        }
    }
}
