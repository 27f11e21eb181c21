//! PPO and behavioral cloning.

pub mod bc;
pub mod gae;
pub mod loss;
pub mod ppo;
pub mod rollout;

use thiserror::Error;

use crate::env::GenerationError;
use crate::policy::PolicyError;

pub use bc::{bc_loss, collect_bc_dataset, read_dataset, train_bc, write_dataset, BcConfig, BcRecord, BcSource, BcStep};
pub use gae::compute_gae;
pub use loss::{batch_loss, batch_loss_grad, clipped_surrogate, normalize_advantages, LossConfig, LossKind, LossStats, Sample};
pub use ppo::{train_ppo, PpoConfig, PpoTrainer, UpdateMetrics};
pub use rollout::{RolloutBuffer, Transition};

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("shape error: {0}")]
    Shape(String),
    #[error("label {action} outside {candidates} candidates")]
    Label { action: usize, candidates: usize },
    #[error("non-finite loss: {0}")]
    NonFinite(String),
    #[error(transparent)]
    Policy(#[from] PolicyError),
    #[error(transparent)]
    Generation(#[from] GenerationError),
    #[error("io: {0}")]
    Io(String),
    #[error("scorer service: {0}")]
    Service(String),
    #[error("config: {0}")]
    Config(String),
}

impl From<std::io::Error> for TrainError {
    fn from(e: std::io::Error) -> Self {
        TrainError::Io(e.to_string())
    }
}
