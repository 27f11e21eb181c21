//! Action scoring: backends, normalization of summed token log-probs into
//! an action distribution, and the built-in trainable models.

pub mod backend;
pub mod checkpoint;
pub mod dist;
pub mod model;
pub mod params;
pub mod vocab;

use thiserror::Error;

pub use backend::{Evaluation, ScorerBackend, UniformScorer, Upstream};
pub use checkpoint::Checkpoint;
pub use dist::{
    action_distribution, distribution_vjp, greedy_action, sample_action, sum_token_logprobs, ActionDistribution,
    Normalization, PolicyConfig, PolicyMode, LOGPROB_FLOOR,
};
pub use model::{BuiltinModel, ModelDims, ModelSpec};
pub use params::{param_digest, ParamLayout, ParamManifest};
pub use vocab::{tokenize, Vocab};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PolicyError {
    #[error("no candidate actions")]
    NoCandidates,
    #[error("candidate {0:?} has no tokens")]
    EmptyCandidate(String),
    #[error("backend has {expected} action heads but {got} candidates were given")]
    ActionCount { expected: usize, got: usize },
    #[error("non-finite value in {0}")]
    NonFinite(String),
    #[error("unsupported: {0}")]
    Unsupported(&'static str),
    #[error("shape error: {0}")]
    Shape(String),
    #[error("checkpoint: {0}")]
    Checkpoint(String),
    #[error("parameter manifest mismatch: expected {expected}, got {got}")]
    ManifestMismatch { expected: String, got: String },
}

/// Summed token log-probability of one candidate.
pub fn action_logprob(backend: &dyn ScorerBackend, prompt: &str, candidate: &str) -> Result<f64, PolicyError> {
    Ok(sum_token_logprobs(&backend.token_logprobs(prompt, candidate)?))
}

/// Score all candidates and normalize them into a distribution.
pub fn policy_distribution(
    backend: &dyn ScorerBackend,
    prompt: &str,
    candidates: &[String],
    normalization: Normalization,
) -> Result<ActionDistribution, PolicyError> {
    let eval = backend.evaluate(prompt, candidates, 0..candidates.len(), false)?;
    action_distribution(
        &eval.raw,
        PolicyConfig {
            normalization,
            mode: backend.mode(),
        },
    )
}
