//! Success-rate evaluation, confidence intervals, action probes and
//! generalization variants.

pub mod generalize;
pub mod probe;
pub mod run;
pub mod stats;

use thiserror::Error;

use crate::env::GenerationError;
use crate::policy::PolicyError;
use crate::text::SubstitutionError;

pub use generalize::{run_generalization_suite, GeneralizationVariant, VariantReport};
pub use probe::{probe_distributions, Probe, ProbeRow, ProbeSeries, ProbeSet};
pub use run::{evaluate_episodes, play_episode, run_eval, Agent, EpisodeResult, EvalReport, TaskStats};
pub use stats::{ci_over_seeds, hoeffding_epsilon, sample_efficiency, Z_99};

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("{0}")]
    Domain(String),
    #[error("oracle bot: {0}")]
    Bot(String),
    #[error(transparent)]
    Generation(#[from] GenerationError),
    #[error(transparent)]
    Policy(#[from] PolicyError),
    #[error(transparent)]
    Substitution(#[from] SubstitutionError),
    #[error("io: {0}")]
    Io(String),
}
