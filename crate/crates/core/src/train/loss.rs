use serde::{Deserialize, Serialize};

use super::TrainError;
use crate::policy::{action_distribution, distribution_vjp, Evaluation, Normalization, PolicyConfig, PolicyMode, ScorerBackend};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LossKind {
    #[default]
    Ppo,
    /// Negative log-likelihood of the labelled action.
    Bc,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LossConfig {
    pub kind: LossKind,
    pub clip_eps: f64,
    pub vf_coef: f64,
    pub entropy_coef: f64,
    pub normalization: Normalization,
}

impl Default for LossConfig {
    fn default() -> Self {
        Self {
            kind: LossKind::Ppo,
            clip_eps: 0.2,
            vf_coef: 0.5,
            entropy_coef: 0.01,
            normalization: Normalization::default(),
        }
    }
}

impl LossConfig {
    pub fn bc(normalization: Normalization) -> Self {
        Self {
            kind: LossKind::Bc,
            normalization,
            ..Self::default()
        }
    }
}

/// One training example. For BC only `prompt`, `candidates` and `action`
/// matter.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub prompt: String,
    pub candidates: Vec<String>,
    pub action: usize,
    #[serde(default)]
    pub old_logprob: f64,
    #[serde(default)]
    pub advantage: f64,
    #[serde(default, rename = "return")]
    pub ret: f64,
}

/// Means over a batch, plus the number of samples they cover.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct LossStats {
    pub count: usize,
    pub policy_loss: f64,
    pub value_loss: f64,
    pub entropy: f64,
    pub total: f64,
    pub approx_kl: f64,
    pub clip_frac: f64,
}

impl LossStats {
    /// Count-weighted average of shard statistics.
    pub fn merge(parts: &[LossStats]) -> LossStats {
        let n: usize = parts.iter().map(|p| p.count).sum();
        if n == 0 {
            return LossStats::default();
        }
        let w = |f: fn(&LossStats) -> f64| parts.iter().map(|p| f(p) * p.count as f64).sum::<f64>() / n as f64;
        LossStats {
            count: n,
            policy_loss: w(|p| p.policy_loss),
            value_loss: w(|p| p.value_loss),
            entropy: w(|p| p.entropy),
            total: w(|p| p.total),
            approx_kl: w(|p| p.approx_kl),
            clip_frac: w(|p| p.clip_frac),
        }
    }
}

/// Clipped surrogate for one sample: `(loss, d loss / d logp, clipped)`.
pub fn clipped_surrogate(logp: f64, old_logp: f64, advantage: f64, clip_eps: f64) -> (f64, f64, bool) {
    let ratio = (logp - old_logp).exp();
    let unclipped = ratio * advantage;
    let clipped = ratio.clamp(1.0 - clip_eps, 1.0 + clip_eps) * advantage;
    if unclipped <= clipped {
        (-unclipped, -unclipped, false)
    } else {
        (-clipped, 0.0, true)
    }
}

struct Terms {
    policy: f64,
    value: f64,
    entropy: f64,
    kl: f64,
    clipped: bool,
    d_raw: Vec<f64>,
    d_value: f64,
}

fn sample_terms(eval: &Evaluation, s: &Sample, cfg: &LossConfig, mode: PolicyMode) -> Result<Terms, TrainError> {
    let pc = PolicyConfig {
        normalization: cfg.normalization,
        mode,
    };
    if s.action >= eval.raw.len() {
        return Err(TrainError::Label {
            action: s.action,
            candidates: eval.raw.len(),
        });
    }
    let dist = action_distribution(&eval.raw, pc)?;
    match cfg.kind {
        LossKind::Bc => {
            let (policy, d_raw) = match mode {
                PolicyMode::TokenScoring => {
                    let mut d = vec![0.0; eval.raw.len()];
                    d[s.action] = -1.0;
                    (-eval.raw[s.action], d)
                }
                PolicyMode::ActionHeads => (-dist.logprobs[s.action], distribution_vjp(&eval.raw, pc, s.action, -1.0, 0.0)),
            };
            Ok(Terms {
                policy,
                value: 0.0,
                entropy: dist.entropy,
                kl: 0.0,
                clipped: false,
                d_raw,
                d_value: 0.0,
            })
        }
        LossKind::Ppo => {
            let logp = dist.logprobs[s.action];
            let (policy, d_logp, clipped) = clipped_surrogate(logp, s.old_logprob, s.advantage, cfg.clip_eps);
            let v = eval.value.ok_or_else(|| TrainError::Shape("backend returned no value".into()))?;
            let err = v - s.ret;
            Ok(Terms {
                policy,
                value: err * err,
                entropy: dist.entropy,
                kl: s.old_logprob - logp,
                clipped,
                d_raw: distribution_vjp(&eval.raw, pc, s.action, d_logp, -cfg.entropy_coef),
                d_value: cfg.vf_coef * 2.0 * err,
            })
        }
    }
}

/// Mean loss over `samples` and its gradient, accumulated into `grad`
/// (already scaled by `1 / samples.len()`).
pub fn batch_loss_grad(
    backend: &dyn ScorerBackend,
    samples: &[Sample],
    cfg: &LossConfig,
    grad: &mut [f64],
) -> Result<LossStats, TrainError> {
    let n = samples.len();
    if n == 0 {
        return Ok(LossStats::default());
    }
    let scale = 1.0 / n as f64;
    let mode = backend.mode();
    let mut stats = LossStats {
        count: n,
        ..LossStats::default()
    };
    let want_value = cfg.kind == LossKind::Ppo;
    for s in samples {
        let mut failure = None;
        let mut terms = None;
        backend.forward_backward(&s.prompt, &s.candidates, want_value, grad, &mut |eval: &Evaluation| {
            match sample_terms(eval, s, cfg, mode) {
                Ok(t) => {
                    let d_raw = t.d_raw.iter().map(|g| g * scale).collect();
                    let d_value = t.d_value * scale;
                    terms = Some(t);
                    (d_raw, d_value)
                }
                Err(e) => {
                    failure = Some(e);
                    (vec![0.0; eval.raw.len()], 0.0)
                }
            }
        })?;
        if let Some(e) = failure {
            return Err(e);
        }
        let t = terms.expect("upstream ran");
        let total = t.policy + cfg.vf_coef * t.value - cfg.entropy_coef * t.entropy;
        if !total.is_finite() {
            return Err(TrainError::NonFinite(format!(
                "loss {total} (policy {}, value {}, entropy {}) on prompt {:?}",
                t.policy, t.value, t.entropy, s.prompt
            )));
        }
        stats.policy_loss += t.policy * scale;
        stats.value_loss += t.value * scale;
        stats.entropy += t.entropy * scale;
        stats.approx_kl += t.kl * scale;
        stats.clip_frac += if t.clipped { scale } else { 0.0 };
        stats.total += if cfg.kind == LossKind::Bc { t.policy * scale } else { total * scale };
    }
    Ok(stats)
}

/// Loss value only, for finite-difference checks.
pub fn batch_loss(backend: &dyn ScorerBackend, samples: &[Sample], cfg: &LossConfig) -> Result<f64, TrainError> {
    let mut scratch = vec![0.0; backend.params().len()];
    Ok(batch_loss_grad(backend, samples, cfg, &mut scratch)?.total)
}

/// Normalize advantages to zero mean and unit variance in place.
pub fn normalize_advantages(samples: &mut [Sample]) {
    let n = samples.len();
    if n < 2 {
        return;
    }
    let mean = samples.iter().map(|s| s.advantage).sum::<f64>() / n as f64;
    let var = samples.iter().map(|s| (s.advantage - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    let std = var.sqrt() + 1e-8;
    for s in samples {
        s.advantage = (s.advantage - mean) / std;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn clip_arithmetic() {
        let (loss, d, clipped) = clipped_surrogate(1.5f64.ln(), 0.0, 1.0, 0.2);
        assert!((loss + 1.2).abs() < 1e-12);
        assert_eq!(d, 0.0);
        assert!(clipped);
        // negative advantage keeps the unclipped (more pessimistic) term
        let (loss, _, clipped) = clipped_surrogate(1.5f64.ln(), 0.0, -1.0, 0.2);
        assert!((loss - 1.5).abs() < 1e-12);
        assert!(!clipped);
    }

    #[test]
    fn normalized_advantages_have_zero_mean() {
        let mut s: Vec<Sample> = (0..5)
            .map(|i| Sample {
                prompt: String::new(),
                candidates: vec![],
                action: 0,
                old_logprob: 0.0,
                advantage: i as f64,
                ret: 0.0,
            })
            .collect();
        normalize_advantages(&mut s);
        let mean: f64 = s.iter().map(|x| x.advantage).sum::<f64>() / 5.0;
        assert!(mean.abs() < 1e-12);
    }
}
