use rand::Rng;
use serde::{Deserialize, Serialize};

use super::PolicyError;

/// Lower bound applied to token log-probabilities.
pub const LOGPROB_FLOOR: f64 = -80.0;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Normalization {
    /// Softmax over summed token log-probs, i.e. `p_i / sum_j p_j`.
    Renormalize,
    /// Softmax over `p_i / max_j p_j`.
    #[default]
    MaxTemperature,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PolicyMode {
    #[default]
    TokenScoring,
    ActionHeads,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(default)]
pub struct PolicyConfig {
    pub normalization: Normalization,
    pub mode: PolicyMode,
}

impl PolicyConfig {
    pub fn heads() -> Self {
        Self {
            mode: PolicyMode::ActionHeads,
            ..Self::default()
        }
    }

    pub fn tokens(normalization: Normalization) -> Self {
        Self {
            normalization,
            mode: PolicyMode::TokenScoring,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ActionDistribution {
    pub probs: Vec<f64>,
    pub logprobs: Vec<f64>,
    pub entropy: f64,
}

fn argmax(xs: &[f64]) -> usize {
    let mut best = 0;
    for (i, x) in xs.iter().enumerate() {
        if *x > xs[best] {
            best = i;
        }
    }
    best
}

/// Raw backend scores to softmax logits: identity for heads and
/// renormalization, `exp(s_i - s_max)` for the max-temperature mode.
fn to_logits(raw: &[f64], config: PolicyConfig) -> Vec<f64> {
    match (config.mode, config.normalization) {
        (PolicyMode::TokenScoring, Normalization::MaxTemperature) => {
            let m = raw[argmax(raw)];
            raw.iter().map(|s| (s - m).exp()).collect()
        }
        _ => raw.to_vec(),
    }
}

/// Pull a logit gradient back to raw scores.
fn logits_vjp(raw: &[f64], logits: &[f64], d_logits: &[f64], config: PolicyConfig) -> Vec<f64> {
    match (config.mode, config.normalization) {
        (PolicyMode::TokenScoring, Normalization::MaxTemperature) => {
            let m = argmax(raw);
            let mut d = vec![0.0; raw.len()];
            for i in 0..raw.len() {
                if i == m {
                    continue;
                }
                let g = d_logits[i] * logits[i];
                d[i] += g;
                d[m] -= g;
            }
            d
        }
        _ => d_logits.to_vec(),
    }
}

fn log_softmax(u: &[f64]) -> Vec<f64> {
    let m = u[argmax(u)];
    let lse = m + u.iter().map(|x| (x - m).exp()).sum::<f64>().ln();
    u.iter().map(|x| x - lse).collect()
}

/// Normalize raw action scores into a distribution.
pub fn action_distribution(raw: &[f64], config: PolicyConfig) -> Result<ActionDistribution, PolicyError> {
    if raw.is_empty() {
        return Err(PolicyError::NoCandidates);
    }
    if raw.iter().any(|x| x.is_nan() || *x == f64::INFINITY) {
        return Err(PolicyError::NonFinite("action scores".into()));
    }
    if raw.iter().all(|x| *x == f64::NEG_INFINITY) {
        return Err(PolicyError::NonFinite("all action scores are -inf".into()));
    }
    let logprobs = log_softmax(&to_logits(raw, config));
    let probs: Vec<f64> = logprobs.iter().map(|l| l.exp()).collect();
    let entropy = -probs
        .iter()
        .zip(&logprobs)
        .filter(|(p, _)| **p > 0.0)
        .map(|(p, l)| p * l)
        .sum::<f64>();
    Ok(ActionDistribution {
        probs,
        logprobs,
        entropy: entropy.max(0.0),
    })
}

/// Gradient of `w_logp * log pi(action) + w_ent * H(pi)` with respect to the
/// raw scores.
pub fn distribution_vjp(
    raw: &[f64],
    config: PolicyConfig,
    action: usize,
    w_logp: f64,
    w_ent: f64,
) -> Vec<f64> {
    let logits = to_logits(raw, config);
    let logp = log_softmax(&logits);
    let p: Vec<f64> = logp.iter().map(|l| l.exp()).collect();
    let h = -p.iter().zip(&logp).map(|(a, b)| a * b).sum::<f64>();
    let d_logits: Vec<f64> = (0..raw.len())
        .map(|j| {
            let onehot = if j == action { 1.0 } else { 0.0 };
            w_logp * (onehot - p[j]) - w_ent * p[j] * (logp[j] + h)
        })
        .collect();
    logits_vjp(raw, &logits, &d_logits, config)
}

/// Inverse-CDF sampling.
pub fn sample_action<R: Rng + ?Sized>(probs: &[f64], rng: &mut R) -> usize {
    let u: f64 = rng.gen();
    let mut acc = 0.0;
    for (i, p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return i;
        }
    }
    probs.iter().rposition(|p| *p > 0.0).unwrap_or(0)
}

pub fn greedy_action(probs: &[f64]) -> usize {
    argmax(probs)
}

/// Sum of per-token log-probabilities after flooring.
pub fn sum_token_logprobs(token_logprobs: &[f64]) -> f64 {
    token_logprobs.iter().map(|l| l.max(LOGPROB_FLOOR)).sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    fn raw_from_probs(p: &[f64]) -> Vec<f64> {
        p.iter().map(|x| x.ln()).collect()
    }

    #[test]
    fn renormalize_is_p_over_sum() {
        let d = action_distribution(&raw_from_probs(&[0.6, 0.2]), PolicyConfig::tokens(Normalization::Renormalize)).unwrap();
        assert!((d.probs[0] - 0.75).abs() < 1e-12);
        assert!((d.probs[1] - 0.25).abs() < 1e-12);
    }

    #[test]
    fn uniform_scores_give_uniform_distribution() {
        for cfg in [
            PolicyConfig::tokens(Normalization::Renormalize),
            PolicyConfig::tokens(Normalization::MaxTemperature),
            PolicyConfig::heads(),
        ] {
            let d = action_distribution(&[-3.0; 6], cfg).unwrap();
            assert!(d.probs.iter().all(|p| (p - 1.0 / 6.0).abs() < 1e-12));
            assert!((d.entropy - 6f64.ln()).abs() < 1e-12);
        }
    }

    #[test]
    fn vjp_matches_finite_differences() {
        let raw = [-1.3, -0.2, -2.5, -0.9];
        for cfg in [
            PolicyConfig::tokens(Normalization::Renormalize),
            PolicyConfig::tokens(Normalization::MaxTemperature),
        ] {
            let f = |r: &[f64]| {
                let d = action_distribution(r, cfg).unwrap();
                0.7 * d.logprobs[2] + 0.3 * d.entropy
            };
            let g = distribution_vjp(&raw, cfg, 2, 0.7, 0.3);
            for i in 0..raw.len() {
                let mut a = raw;
                let mut b = raw;
                a[i] += 1e-6;
                b[i] -= 1e-6;
                let fd = (f(&a) - f(&b)) / 2e-6;
                assert!((fd - g[i]).abs() < 1e-7, "{cfg:?} {i}: {fd} vs {}", g[i]);
            }
        }
    }

    #[test]
    fn empty_or_all_neg_inf_is_an_error() {
        let cfg = PolicyConfig::default();
        assert!(action_distribution(&[], cfg).is_err());
        assert!(action_distribution(&[f64::NEG_INFINITY; 3], cfg).is_err());
    }

    #[test]
    fn degenerate_sampling_and_determinism() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        for _ in 0..100 {
            assert_eq!(sample_action(&[1.0, 0.0, 0.0], &mut rng), 0);
        }
        let draw = |seed| {
            let mut r = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            (0..20).map(|_| sample_action(&[0.2, 0.3, 0.5], &mut r)).collect::<Vec<_>>()
        };
        assert_eq!(draw(9), draw(9));
    }
}
