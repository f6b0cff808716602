//! Straight-line transcription of the aggregation loop, used only as a test oracle.
//!
//! Deliberately naive: raw coordinate vectors, cumulative losses re-summed from the
//! full history every round, exponential weights without any shift, and the diameter
//! as an explicit double loop over ordered pairs.

#![allow(dead_code, clippy::needless_range_loop)]

#[derive(Debug, Clone)]
pub struct NaiveRound {
    pub scale: f64,
    /// `None` when the scale is zero.
    pub eta: Option<f64>,
    pub weights: Vec<f64>,
    pub aggregated: Vec<f64>,
    pub player_loss: f64,
    pub expert_losses: Vec<f64>,
    pub scale_dagger: f64,
}

pub type RawRound = (Vec<Vec<f64>>, Vec<f64>);

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    let mut s = 0.0;
    for i in 0..a.len() {
        s += (a[i] - b[i]) * (a[i] - b[i]);
    }
    s
}

pub fn naive_run(rounds: &[RawRound]) -> Vec<NaiveRound> {
    let mut out: Vec<NaiveRound> = Vec::new();
    let mut prev_dagger = 0.0;
    for (preds, omega) in rounds {
        let n = preds.len();

        let mut diameter = 0.0;
        for i in 0..n {
            for j in 0..n {
                let d = sq_dist(&preds[i], &preds[j]).sqrt();
                if d > diameter {
                    diameter = d;
                }
            }
        }
        let scale = if prev_dagger > diameter {
            prev_dagger
        } else {
            diameter
        };

        let mut cum = vec![0.0; n];
        for past in &out {
            for k in 0..n {
                cum[k] += past.expert_losses[k];
            }
        }

        let (eta, weights) = if scale > 0.0 {
            let eta = 1.0 / (2.0 * scale * scale);
            let mut denom = 0.0;
            for k in 0..n {
                denom += (-eta * cum[k]).exp();
            }
            let w: Vec<f64> = (0..n).map(|k| (-eta * cum[k]).exp() / denom).collect();
            (Some(eta), w)
        } else {
            let min = cum.iter().cloned().fold(f64::INFINITY, f64::min);
            let count = cum.iter().filter(|&&c| c == min).count() as f64;
            let w: Vec<f64> = cum
                .iter()
                .map(|&c| if c == min { 1.0 / count } else { 0.0 })
                .collect();
            (None, w)
        };

        let mut aggregated = vec![0.0; omega.len()];
        for k in 0..n {
            for d in 0..omega.len() {
                aggregated[d] += weights[k] * preds[k][d];
            }
        }

        let player_loss = sq_dist(omega, &aggregated);
        let expert_losses: Vec<f64> = preds.iter().map(|p| sq_dist(omega, p)).collect();

        let mut scale_dagger = scale;
        let mut worst = 0.0;
        for l in &expert_losses {
            if l.sqrt() > worst {
                worst = l.sqrt();
            }
        }
        if worst > scale_dagger {
            scale_dagger = 2f64.sqrt() * worst;
        }
        prev_dagger = scale_dagger;

        out.push(NaiveRound {
            scale,
            eta,
            weights,
            aggregated,
            player_loss,
            expert_losses,
            scale_dagger,
        });
    }
    out
}

/// `|a - b| <= 1e-9 * max(1, |a|, |b|)`
pub fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-9 * 1f64.max(a.abs()).max(b.abs())
}
