//! Mixloss and machine-checked regret certificates.
//!
//! Every inequality below holds exactly in real arithmetic for the exponential-weights
//! aggregator with the self-tuned rate. The checks only add slack for floating-point
//! roundoff: `1e-9 * max(1, |terms|)` for the loss inequalities and `1e-12` relative
//! for the scale domination bound.

use serde::{Deserialize, Serialize};

use crate::aggregator::{LearningRate, RoundRecord};
use crate::error::{Error, Result};

/// Relative slack for the loss-valued inequalities.
pub const CERT_TOL: f64 = 1e-9;

/// Relative slack for `B†_T <= 2 max √l`.
pub const DAGGER_TOL: f64 = 1e-12;

/// `-(1/η) ln Σ w_n exp(-η l_n)` for `η > 0`.
pub fn mixloss(weights: &[f64], losses: &[f64], eta: f64) -> Result<f64> {
    if eta.is_nan() || eta <= 0.0 || eta.is_infinite() {
        return Err(Error::Precondition(format!(
            "mixloss needs a positive finite learning rate, got {eta}"
        )));
    }
    if weights.len() != losses.len() {
        return Err(Error::Input(format!(
            "{} weights for {} losses",
            weights.len(),
            losses.len()
        )));
    }
    Ok(shifted_mixloss(weights, losses, eta))
}

fn support_min(weights: &[f64], losses: &[f64]) -> f64 {
    weights
        .iter()
        .zip(losses)
        .filter(|(w, _)| **w > 0.0)
        .map(|(_, l)| *l)
        .fold(f64::INFINITY, f64::min)
}

// Shift by the smallest supported loss: every exponent is <= 0 and the argmin term
// keeps the sum bounded away from zero.
fn shifted_mixloss(weights: &[f64], losses: &[f64], eta: f64) -> f64 {
    let min = support_min(weights, losses);
    if !min.is_finite() {
        return f64::NAN;
    }
    let sum: f64 = weights
        .iter()
        .zip(losses)
        .filter(|(w, _)| **w > 0.0)
        .map(|(w, l)| w * (-eta * (l - min)).exp())
        .sum();
    (min - sum.ln() / eta).max(min)
}

/// Mixloss extended to the limits of the rate: `Unbounded` gives the smallest
/// supported loss and a zero rate gives the weighted mean.
pub fn mixloss_at(weights: &[f64], losses: &[f64], eta: LearningRate) -> f64 {
    match eta {
        LearningRate::Unbounded => support_min(weights, losses),
        LearningRate::Finite(eta) if eta > 0.0 => shifted_mixloss(weights, losses, eta),
        LearningRate::Finite(_) => weights.iter().zip(losses).map(|(w, l)| w * l).sum(),
    }
}

fn tol(terms: &[f64]) -> f64 {
    CERT_TOL * terms.iter().fold(1.0f64, |m, x| m.max(x.abs()))
}

/// Outcome of a single check.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Check {
    Pass,
    Fail,
    /// The check does not apply to this strategy.
    NotApplicable,
    /// The check applies but could not be evaluated (e.g. unbounded final rate).
    Skipped,
}

impl Check {
    pub fn from_bool(ok: bool) -> Self {
        if ok {
            Check::Pass
        } else {
            Check::Fail
        }
    }

    pub fn failed(self) -> bool {
        self == Check::Fail
    }
}

/// Which certificates a run is subject to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CertificationMode {
    /// All per-round and cumulative inequalities of the self-tuned aggregator.
    Full,
    /// Simplex and convexity checks only, for the baseline strategies.
    Reduced,
}

/// Per-round inequality checks. Slack is `rhs - lhs`; it is `None` when the check
/// was not evaluated.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundCertificate {
    pub t: usize,
    pub simplex: Check,
    pub eta_monotone: Check,
    /// `B_t >= B†_{t-1}` and `B†_t >= B_t`.
    pub scale_order: Check,
    /// `h_t <= max_n l_n`
    pub convexity: Check,
    /// `h_t <= m_t(η_t) + B†_t² - B_t²`
    pub mixloss_ineq: Check,
    /// `B†_t² > max_n l_n + B_t²` after an escalation.
    pub escalation: Check,
    pub simplex_slack: Option<f64>,
    pub eta_slack: Option<f64>,
    pub convexity_slack: Option<f64>,
    pub mixloss_slack: Option<f64>,
    pub escalation_slack: Option<f64>,
}

impl RoundCertificate {
    fn checks(&self) -> [Check; 6] {
        [
            self.simplex,
            self.eta_monotone,
            self.scale_order,
            self.convexity,
            self.mixloss_ineq,
            self.escalation,
        ]
    }

    pub fn all_ok(&self) -> bool {
        self.checks().iter().all(|c| !c.failed())
    }
}

fn check_simplex(weights: &[f64]) -> (Check, f64) {
    let sum: f64 = weights.iter().sum();
    let slack = crate::vector::SIMPLEX_TOL - (sum - 1.0).abs();
    let ok = slack >= 0.0 && weights.iter().all(|w| w.is_finite() && *w >= 0.0);
    (Check::from_bool(ok), slack)
}

fn check_convexity(record: &RoundRecord) -> (Check, f64) {
    let worst = record.expert_losses.iter().copied().fold(0.0, f64::max);
    let slack = worst - record.player_loss;
    let ok = slack + tol(&[worst, record.player_loss]) >= 0.0;
    (Check::from_bool(ok), slack)
}

/// Certifies one round of the self-tuned aggregator.
///
/// `prev_scale_dagger` is `B†_{t-1}` (0 before the first round) and `prev_eta` is
/// `η_{t-1}` (`None` before the first round). The mixloss is recomputed from the
/// record's weights and losses rather than read from its `mixloss` field.
pub fn certify_round(
    prev_scale_dagger: f64,
    record: &RoundRecord,
    prev_eta: Option<LearningRate>,
) -> RoundCertificate {
    let (simplex, simplex_slack) = check_simplex(&record.weights);
    let (convexity, convexity_slack) = check_convexity(record);

    let (eta_monotone, eta_slack) = match (prev_eta, record.learning_rate) {
        (None, _) | (Some(LearningRate::Unbounded), _) => (Check::Pass, None),
        (Some(LearningRate::Finite(_)), LearningRate::Unbounded) => (Check::Fail, None),
        (Some(LearningRate::Finite(prev)), LearningRate::Finite(cur)) => {
            let slack = prev - cur;
            (
                Check::from_bool(slack + CERT_TOL * prev.max(cur) >= 0.0),
                Some(slack),
            )
        }
    };

    let scale_order =
        Check::from_bool(record.scale >= prev_scale_dagger && record.scale_dagger >= record.scale);

    let m = mixloss_at(&record.weights, &record.expert_losses, record.learning_rate);
    let dagger_sq = record.scale_dagger * record.scale_dagger;
    let scale_sq = record.scale * record.scale;
    let rhs = m + dagger_sq - scale_sq;
    let mixloss_slack = rhs - record.player_loss;
    let mixloss_ineq = Check::from_bool(
        m.is_finite() && mixloss_slack + tol(&[record.player_loss, m, dagger_sq, scale_sq]) >= 0.0,
    );

    let worst = record.expert_losses.iter().copied().fold(0.0, f64::max);
    let (escalation, escalation_slack) = if worst.sqrt() > record.scale {
        let slack = dagger_sq - (worst + scale_sq);
        (Check::from_bool(slack > 0.0), Some(slack))
    } else {
        (Check::Pass, None)
    };

    RoundCertificate {
        t: record.t,
        simplex,
        eta_monotone,
        scale_order,
        convexity,
        mixloss_ineq,
        escalation,
        simplex_slack: Some(simplex_slack),
        eta_slack,
        convexity_slack: Some(convexity_slack),
        mixloss_slack: Some(mixloss_slack),
        escalation_slack,
    }
}

/// Reduced certificate for baseline strategies: simplex and convexity only.
pub fn certify_baseline_round(record: &RoundRecord) -> RoundCertificate {
    let (simplex, simplex_slack) = check_simplex(&record.weights);
    let (convexity, convexity_slack) = check_convexity(record);
    RoundCertificate {
        t: record.t,
        simplex,
        eta_monotone: Check::NotApplicable,
        scale_order: Check::NotApplicable,
        convexity,
        mixloss_ineq: Check::NotApplicable,
        escalation: Check::NotApplicable,
        simplex_slack: Some(simplex_slack),
        eta_slack: None,
        convexity_slack: Some(convexity_slack),
        mixloss_slack: None,
        escalation_slack: None,
    }
}

/// Failure counts over all rounds of a run.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CertificateSummary {
    pub rounds: usize,
    pub simplex_failures: usize,
    pub eta_monotone_failures: usize,
    pub scale_order_failures: usize,
    pub convexity_failures: usize,
    pub mixloss_ineq_failures: usize,
    pub escalation_failures: usize,
    pub first_failure_round: Option<usize>,
}

impl CertificateSummary {
    fn absorb(&mut self, cert: &RoundCertificate) {
        self.rounds += 1;
        self.simplex_failures += cert.simplex.failed() as usize;
        self.eta_monotone_failures += cert.eta_monotone.failed() as usize;
        self.scale_order_failures += cert.scale_order.failed() as usize;
        self.convexity_failures += cert.convexity.failed() as usize;
        self.mixloss_ineq_failures += cert.mixloss_ineq.failed() as usize;
        self.escalation_failures += cert.escalation.failed() as usize;
        if !cert.all_ok() && self.first_failure_round.is_none() {
            self.first_failure_round = Some(cert.t);
        }
    }

    pub fn total_failures(&self) -> usize {
        self.simplex_failures
            + self.eta_monotone_failures
            + self.scale_order_failures
            + self.convexity_failures
            + self.mixloss_ineq_failures
            + self.escalation_failures
    }
}

/// End-of-run regret and bound certificates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegretReport {
    pub mode: CertificationMode,
    pub rounds: usize,
    pub num_experts: usize,
    pub total_player_loss: f64,
    pub best_expert_loss: f64,
    /// 1-based; ties go to the lowest index.
    pub best_expert_index: usize,
    pub regret: f64,
    pub max_expert_loss: f64,
    pub final_scale: f64,
    pub final_scale_dagger: f64,
    pub final_learning_rate: LearningRate,
    /// `(2 ln N + 1) B†_T²`
    pub bound_dagger: f64,
    /// `4 (2 ln N + 1) max_{t,n} l`
    pub bound_maxloss: f64,
    pub regret_within_bound_dagger: Check,
    pub regret_within_bound_maxloss: Check,
    /// `bound_dagger <= bound_maxloss`
    pub bound_chain: Check,
    pub mixloss_sum: f64,
    /// `ln N / η_T + min_n L_T`, absent when `η_T` is unbounded.
    pub mixloss_sum_limit: Option<f64>,
    pub mixloss_cum_bound: Check,
    /// `B†_T <= 2 max_{t,n} √l`
    pub dagger_dominated: Check,
    pub summary: CertificateSummary,
    pub all_passed: bool,
}

/// Streaming certifier; feed records in round order and call [`RunCertifier::finish`].
#[derive(Debug, Clone)]
pub struct RunCertifier {
    mode: CertificationMode,
    num_experts: usize,
    prev_scale_dagger: f64,
    prev_eta: Option<LearningRate>,
    last: Option<(f64, f64, LearningRate)>,
    total_player_loss: f64,
    cumulative_losses: Vec<f64>,
    max_expert_loss: f64,
    mixloss_sum: f64,
    summary: CertificateSummary,
}

impl RunCertifier {
    pub fn new(num_experts: usize, mode: CertificationMode) -> Self {
        Self {
            mode,
            num_experts,
            prev_scale_dagger: 0.0,
            prev_eta: None,
            last: None,
            total_player_loss: 0.0,
            cumulative_losses: vec![0.0; num_experts],
            max_expert_loss: 0.0,
            mixloss_sum: 0.0,
            summary: CertificateSummary::default(),
        }
    }

    pub fn observe(&mut self, record: &RoundRecord) -> Result<RoundCertificate> {
        let expected_t = self.summary.rounds + 1;
        if record.t != expected_t {
            return Err(Error::Input(format!(
                "record for round {} where round {expected_t} was expected",
                record.t
            )));
        }
        if record.weights.len() != self.num_experts
            || record.expert_losses.len() != self.num_experts
        {
            return Err(Error::Input(format!(
                "round {} carries {} weights and {} losses for {} experts",
                record.t,
                record.weights.len(),
                record.expert_losses.len(),
                self.num_experts
            )));
        }
        let cert = match self.mode {
            CertificationMode::Full => certify_round(self.prev_scale_dagger, record, self.prev_eta),
            CertificationMode::Reduced => certify_baseline_round(record),
        };
        self.summary.absorb(&cert);
        self.total_player_loss += record.player_loss;
        for (cum, l) in self.cumulative_losses.iter_mut().zip(&record.expert_losses) {
            *cum += l;
            self.max_expert_loss = self.max_expert_loss.max(*l);
        }
        self.mixloss_sum +=
            mixloss_at(&record.weights, &record.expert_losses, record.learning_rate);
        self.prev_scale_dagger = record.scale_dagger;
        self.prev_eta = Some(record.learning_rate);
        self.last = Some((record.scale, record.scale_dagger, record.learning_rate));
        Ok(cert)
    }

    pub fn finish(self) -> Result<RegretReport> {
        let (final_scale, final_scale_dagger, final_learning_rate) = self
            .last
            .ok_or_else(|| Error::Precondition("cannot certify an empty run".into()))?;
        let (best_idx, best_expert_loss) = self.cumulative_losses.iter().copied().enumerate().fold(
            (0, f64::INFINITY),
            |(bi, bl), (i, l)| if l < bl { (i, l) } else { (bi, bl) },
        );
        let total = self.total_player_loss;
        let regret = total - best_expert_loss;
        let ln_n = (self.num_experts as f64).ln();
        let factor = 2.0 * ln_n + 1.0;
        let bound_dagger = factor * final_scale_dagger * final_scale_dagger;
        let bound_maxloss = 4.0 * factor * self.max_expert_loss;
        let limit = final_learning_rate
            .finite()
            .filter(|eta| *eta > 0.0)
            .map(|eta| ln_n / eta + best_expert_loss);

        let full = self.mode == CertificationMode::Full;
        let gated = |ok: bool| {
            if full {
                Check::from_bool(ok)
            } else {
                Check::NotApplicable
            }
        };
        let regret_tol = |bound: f64| tol(&[total, best_expert_loss, bound]);
        let regret_within_bound_dagger = gated(regret <= bound_dagger + regret_tol(bound_dagger));
        let regret_within_bound_maxloss =
            gated(regret <= bound_maxloss + regret_tol(bound_maxloss));
        let bound_chain = gated(bound_dagger <= bound_maxloss * (1.0 + CERT_TOL));
        let mixloss_cum_bound = match (full, limit) {
            (false, _) => Check::NotApplicable,
            (true, None) => Check::Skipped,
            (true, Some(limit)) => {
                Check::from_bool(self.mixloss_sum <= limit + tol(&[self.mixloss_sum, limit]))
            }
        };
        let dagger_dominated =
            gated(final_scale_dagger <= 2.0 * self.max_expert_loss.sqrt() * (1.0 + DAGGER_TOL));

        let all_passed = self.summary.total_failures() == 0
            && ![
                regret_within_bound_dagger,
                regret_within_bound_maxloss,
                bound_chain,
                mixloss_cum_bound,
                dagger_dominated,
            ]
            .iter()
            .any(|c| c.failed());

        Ok(RegretReport {
            mode: self.mode,
            rounds: self.summary.rounds,
            num_experts: self.num_experts,
            total_player_loss: total,
            best_expert_loss,
            best_expert_index: best_idx + 1,
            regret,
            max_expert_loss: self.max_expert_loss,
            final_scale,
            final_scale_dagger,
            final_learning_rate,
            bound_dagger,
            bound_maxloss,
            regret_within_bound_dagger,
            regret_within_bound_maxloss,
            bound_chain,
            mixloss_sum: self.mixloss_sum,
            mixloss_sum_limit: limit,
            mixloss_cum_bound,
            dagger_dominated,
            summary: self.summary,
            all_passed,
        })
    }
}

fn certify_with<'a, I>(
    records: I,
    num_experts: usize,
    mode: CertificationMode,
) -> Result<RegretReport>
where
    I: IntoIterator<Item = &'a RoundRecord>,
{
    let mut certifier = RunCertifier::new(num_experts, mode);
    for r in records {
        certifier.observe(r)?;
    }
    certifier.finish()
}

/// Full certification of a run of the self-tuned aggregator.
pub fn certify_run<'a, I>(records: I, num_experts: usize) -> Result<RegretReport>
where
    I: IntoIterator<Item = &'a RoundRecord>,
{
    certify_with(records, num_experts, CertificationMode::Full)
}

/// Reduced certification for baseline runs.
pub fn certify_baseline_run<'a, I>(records: I, num_experts: usize) -> Result<RegretReport>
where
    I: IntoIterator<Item = &'a RoundRecord>,
{
    certify_with(records, num_experts, CertificationMode::Reduced)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::aggregator::{run, AggregatorConfig};
    use crate::stream::Round;
    use approx::assert_relative_eq;

    fn trace() -> Vec<RoundRecord> {
        let rounds = vec![
            Round::from_coords(&[&[0.0], &[1.0]], &[1.0]).unwrap(),
            Round::from_coords(&[&[0.0], &[2.0]], &[10.0]).unwrap(),
        ];
        run(AggregatorConfig::new(2, 1).unwrap(), &rounds).unwrap()
    }

    #[test]
    fn mixloss_examples() {
        assert_relative_eq!(
            mixloss(&[0.2, 0.3, 0.5], &[4.0, 4.0, 4.0], 3.0).unwrap(),
            4.0,
            epsilon = 1e-12
        );
        let direct = -2.0 * (0.5 * (-0.5f64).exp() + 0.5).ln();
        let m = mixloss(&[0.5, 0.5], &[1.0, 0.0], 0.5).unwrap();
        assert_relative_eq!(m, direct, epsilon = 1e-15);
        assert_relative_eq!(m, 0.43814039275967726, epsilon = 1e-14);
        assert_eq!(mixloss(&[1.0, 0.0], &[1.0, 1e9], 0.01).unwrap(), 1.0);
        assert_eq!(mixloss(&[1.0, 0.0], &[1.0, 1e9], 100.0).unwrap(), 1.0);
    }

    #[test]
    fn mixloss_rejects_bad_rate() {
        assert!(matches!(
            mixloss(&[1.0], &[1.0], 0.0),
            Err(Error::Precondition(_))
        ));
        assert!(matches!(
            mixloss(&[1.0], &[1.0], -1.0),
            Err(Error::Precondition(_))
        ));
        assert!(mixloss(&[1.0], &[1.0], f64::NAN).is_err());
    }

    #[test]
    fn hand_trace_round_certificates() {
        let records = trace();
        let c1 = certify_round(0.0, &records[0], None);
        assert!(c1.all_ok());
        assert_eq!(c1.mixloss_ineq, Check::Pass);
        assert_relative_eq!(
            c1.mixloss_slack.unwrap(),
            0.18814039275967726,
            epsilon = 1e-14
        );

        let c2 = certify_round(
            records[0].scale_dagger,
            &records[1],
            Some(records[0].learning_rate),
        );
        assert!(c2.all_ok());
        // m_2 >= 64, so the right-hand side is at least 260
        assert!(records[1].mixloss >= 64.0);
        assert!(c2.mixloss_slack.unwrap() >= 260.0 - records[1].player_loss);
        assert_relative_eq!(c2.mixloss_slack.unwrap(), 185.1023863360453, epsilon = 1e-9);
        assert_eq!(c2.escalation, Check::Pass);
    }

    #[test]
    fn hand_trace_run_report() {
        let report = certify_run(&trace(), 2).unwrap();
        assert_relative_eq!(report.total_player_loss, 80.1303586584903, epsilon = 1e-10);
        assert_eq!(report.best_expert_loss, 64.0);
        assert_eq!(report.best_expert_index, 2);
        assert_relative_eq!(report.regret, 16.130358658490294, epsilon = 1e-10);
        let factor = 2.0 * 2f64.ln() + 1.0;
        assert_relative_eq!(report.bound_maxloss, 4.0 * factor * 100.0, epsilon = 1e-9);
        assert_relative_eq!(report.bound_maxloss, 954.518, epsilon = 1e-3);
        assert_relative_eq!(report.bound_dagger, 477.259, epsilon = 1e-3);
        assert!(report.all_passed, "{report:#?}");
        assert_eq!(report.mixloss_cum_bound, Check::Pass);
        assert_relative_eq!(report.mixloss_sum, 69.42088538729526, epsilon = 1e-10);
        assert_relative_eq!(
            report.mixloss_sum_limit.unwrap(),
            69.54517744447956,
            epsilon = 1e-10
        );
    }

    #[test]
    fn zero_loss_round_certifies() {
        let rounds = vec![Round::from_coords(&[&[2.0], &[2.0]], &[2.0]).unwrap(); 3];
        let records = run(AggregatorConfig::new(2, 1).unwrap(), &rounds).unwrap();
        for r in &records {
            let c = certify_round(0.0, r, None);
            assert!(c.all_ok());
            assert!(c.mixloss_slack.unwrap() >= 0.0);
            assert!(c.convexity_slack.unwrap() >= 0.0);
        }
        let report = certify_run(&records, 2).unwrap();
        assert_eq!(report.regret, 0.0);
        assert_eq!(report.final_scale_dagger, 0.0);
        assert_eq!(report.mixloss_cum_bound, Check::Skipped);
        assert!(report.all_passed);
    }

    #[test]
    fn empty_run_is_rejected() {
        assert!(matches!(certify_run(&[], 2), Err(Error::Precondition(_))));
    }

    #[test]
    fn corrupted_player_loss_is_caught() {
        let mut records = trace();
        records[1].player_loss += 1e6;
        let report = certify_run(&records, 2).unwrap();
        assert!(!report.all_passed);
        assert_eq!(report.summary.mixloss_ineq_failures, 1);
        assert_eq!(report.summary.first_failure_round, Some(2));
    }

    #[test]
    fn out_of_order_records_are_rejected() {
        let records = trace();
        let mut c = RunCertifier::new(2, CertificationMode::Full);
        assert!(c.observe(&records[1]).is_err());
    }
}
