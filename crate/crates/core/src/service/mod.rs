//! Scorer service: a framed JSON protocol, workers that hold model
//! replicas, and a dispatcher that fans requests out across them.

pub mod dispatcher;
pub mod protocol;
pub mod tcp;
pub mod transcript;
pub mod worker;

use thiserror::Error;

use crate::policy::PolicyError;

pub use dispatcher::{Dispatcher, ScoreItem, UpdateSummary};
pub use protocol::{Frame, Request, Response};
pub use tcp::{serve_listener, serve_worker, TcpWorker, DEFAULT_TIMEOUT};
pub use transcript::{read_transcript, record_transcript, replay_transcript, write_transcript, TranscriptEntry};
pub use worker::{InProcessWorker, SimulatedLatency, Worker};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ServiceError {
    #[error("io: {0}")]
    Io(String),
    #[error("connection closed")]
    Closed,
    #[error("protocol: {0}")]
    Protocol(String),
    #[error("worker error: {0}")]
    Remote(String),
    #[error("parameter manifest mismatch: expected {expected}, got {got}")]
    Manifest { expected: String, got: String },
    #[error("workers disagree after update: {0}")]
    Diverged(String),
    #[error("no healthy workers")]
    NoWorkers,
    #[error(transparent)]
    Policy(#[from] PolicyError),
}

impl From<std::io::Error> for ServiceError {
    fn from(e: std::io::Error) -> Self {
        ServiceError::Io(e.to_string())
    }
}
