use std::ops::Range;

use serde::{Deserialize, Serialize};

use super::dist::PolicyMode;
use super::params::ParamManifest;
use super::vocab::tokenize;
use super::PolicyError;

/// Raw scores for a candidate range plus an optional state value.
///
/// In token-scoring mode `raw` holds summed token log-probabilities; in
/// action-heads mode it holds head logits.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub raw: Vec<f64>,
    pub value: Option<f64>,
}

/// Maps an evaluation to `(d loss / d raw, d loss / d value)`.
pub type Upstream<'a> = &'a mut dyn FnMut(&Evaluation) -> (Vec<f64>, f64);

/// Anything that can score candidate actions for a prompt and be trained
/// through a flat parameter vector.
pub trait ScorerBackend: Send + Sync {
    /// Backend family name stored in checkpoints.
    fn kind(&self) -> &'static str;

    fn mode(&self) -> PolicyMode;

    fn manifest(&self) -> ParamManifest;

    fn params(&self) -> &[f64];

    fn params_mut(&mut self) -> &mut [f64];

    /// Score `candidates[range]`. The full list is passed so that
    /// action-heads backends can check it against their head count.
    fn evaluate(
        &self,
        prompt: &str,
        candidates: &[String],
        range: Range<usize>,
        want_value: bool,
    ) -> Result<Evaluation, PolicyError>;

    /// Evaluate all candidates, ask `upstream` for the loss gradient with
    /// respect to the outputs and accumulate the parameter gradient.
    fn forward_backward(
        &self,
        prompt: &str,
        candidates: &[String],
        want_value: bool,
        grad: &mut [f64],
        upstream: Upstream<'_>,
    ) -> Result<Evaluation, PolicyError>;

    /// Per-token log-probabilities of one candidate.
    fn token_logprobs(&self, prompt: &str, candidate: &str) -> Result<Vec<f64>, PolicyError>;

    /// Everything besides the parameters needed to rebuild the backend.
    fn spec_json(&self) -> serde_json::Value;

    fn clone_box(&self) -> Box<dyn ScorerBackend>;
}

impl Clone for Box<dyn ScorerBackend> {
    fn clone(&self) -> Self {
        self.clone_box()
    }
}

/// Assigns every token probability `1 / vocab_size`; has no parameters.
/// In action-heads mode every action gets logit 0 instead, which makes the
/// action distribution uniform.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct UniformScorer {
    pub vocab_size: usize,
    #[serde(default)]
    pub mode: PolicyMode,
}

impl UniformScorer {
    pub fn new(vocab_size: usize) -> Self {
        Self {
            vocab_size,
            mode: PolicyMode::TokenScoring,
        }
    }

    pub fn heads(vocab_size: usize) -> Self {
        Self {
            vocab_size,
            mode: PolicyMode::ActionHeads,
        }
    }

    fn token_count(candidate: &str) -> Result<usize, PolicyError> {
        match tokenize(candidate).count() {
            0 => Err(PolicyError::EmptyCandidate(candidate.to_string())),
            n => Ok(n),
        }
    }
}

impl ScorerBackend for UniformScorer {
    fn kind(&self) -> &'static str {
        "uniform"
    }

    fn mode(&self) -> PolicyMode {
        self.mode
    }

    fn manifest(&self) -> ParamManifest {
        super::params::ParamLayout::default().manifest(match self.mode {
            PolicyMode::TokenScoring => "uniform/tokens",
            PolicyMode::ActionHeads => "uniform/heads",
        })
    }

    fn params(&self) -> &[f64] {
        &[]
    }

    fn params_mut(&mut self) -> &mut [f64] {
        &mut []
    }

    fn evaluate(
        &self,
        _prompt: &str,
        candidates: &[String],
        range: Range<usize>,
        want_value: bool,
    ) -> Result<Evaluation, PolicyError> {
        if candidates.is_empty() {
            return Err(PolicyError::NoCandidates);
        }
        let lnv = (self.vocab_size as f64).ln();
        let raw = candidates
            .get(range.clone())
            .ok_or_else(|| PolicyError::Shape(format!("range {range:?} out of bounds")))?
            .iter()
            .map(|c| {
                let n = Self::token_count(c)? as f64;
                Ok(match self.mode {
                    PolicyMode::TokenScoring => -n * lnv,
                    PolicyMode::ActionHeads => 0.0,
                })
            })
            .collect::<Result<_, PolicyError>>()?;
        Ok(Evaluation {
            raw,
            value: want_value.then_some(0.0),
        })
    }

    fn forward_backward(
        &self,
        prompt: &str,
        candidates: &[String],
        want_value: bool,
        _grad: &mut [f64],
        upstream: Upstream<'_>,
    ) -> Result<Evaluation, PolicyError> {
        let e = self.evaluate(prompt, candidates, 0..candidates.len(), want_value)?;
        upstream(&e);
        Ok(e)
    }

    fn token_logprobs(&self, _prompt: &str, candidate: &str) -> Result<Vec<f64>, PolicyError> {
        let n = Self::token_count(candidate)?;
        Ok(vec![-(self.vocab_size as f64).ln(); n])
    }

    fn spec_json(&self) -> serde_json::Value {
        serde_json::to_value(self).expect("serializes")
    }

    fn clone_box(&self) -> Box<dyn ScorerBackend> {
        Box::new(self.clone())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn uniform_two_token_action() {
        let u = UniformScorer::new(10);
        let e = u
            .evaluate("p", &["turn left".to_string(), "drop".to_string()], 0..2, true)
            .unwrap();
        assert!((e.raw[0] + 2.0 * 10f64.ln()).abs() < 1e-12);
        assert!((e.raw[1] + 10f64.ln()).abs() < 1e-12);
        assert_eq!(e.value, Some(0.0));
    }
}
