use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::RwLock;
use std::time::Duration;

use super::protocol::{
    ApplyRequest, ApplyResponse, DigestResponse, Frame, GradResponse, HelloResponse, Request, Response, ScoreRequest,
    ScoreResponse, ScoreResult, UpdateRequest, ValueRequest, ValueResponse,
};
use super::ServiceError;
use crate::optim::{clip_grad_norm, Adam, AdamConfig};
use crate::policy::{param_digest, ScorerBackend};
use crate::train::batch_loss_grad;

/// Something that answers protocol requests.
pub trait Worker: Send + Sync {
    fn call(&self, request: &Request) -> Result<Response, ServiceError>;

    fn describe(&self) -> String;
}

struct State {
    backend: Box<dyn ScorerBackend>,
    adam: Adam,
}

/// A worker holding its own backend replica and optimizer state.
pub struct InProcessWorker {
    name: String,
    state: RwLock<State>,
    shutdown: AtomicBool,
}

impl InProcessWorker {
    pub fn new(name: impl Into<String>, backend: Box<dyn ScorerBackend>, adam: AdamConfig) -> Self {
        let n = backend.params().len();
        Self::with_optimizer(name, backend, Adam::new(adam, n))
    }

    pub fn with_optimizer(name: impl Into<String>, backend: Box<dyn ScorerBackend>, adam: Adam) -> Self {
        Self {
            name: name.into(),
            state: RwLock::new(State { backend, adam }),
            shutdown: AtomicBool::new(false),
        }
    }

    pub fn is_shut_down(&self) -> bool {
        self.shutdown.load(Ordering::SeqCst)
    }

    /// Answer one request; failures become `Response::Error`.
    pub fn handle(&self, request: &Request) -> Response {
        match self.dispatch(request) {
            Ok(r) => r,
            Err(e) => Response::Error(e.to_string()),
        }
    }

    /// Decode, answer and encode one frame. Undecodable requests get an
    /// error frame carrying the request id.
    pub fn handle_frame(&self, frame: Frame) -> Frame {
        let id = frame.id;
        match Request::from_frame(frame) {
            Ok(req) => self.handle(&req).to_frame(id),
            Err(e) => Response::Error(e.to_string()).to_frame(id),
        }
    }

    fn read(&self) -> std::sync::RwLockReadGuard<'_, State> {
        self.state.read().unwrap_or_else(|p| p.into_inner())
    }

    fn dispatch(&self, request: &Request) -> Result<Response, ServiceError> {
        match request {
            Request::Hello => {
                let s = self.read();
                Ok(Response::Hello(HelloResponse {
                    capabilities: vec!["score".into(), "value".into(), "update".into()],
                    manifest: s.backend.manifest(),
                    mode: s.backend.mode(),
                    digest: param_digest(s.backend.params()),
                }))
            }
            Request::Score(r) => self.score(r).map(Response::Score),
            Request::Value(r) => self.value(r).map(Response::Value),
            Request::UpdateGrad(r) => self.update_grad(r).map(Response::UpdateGrad),
            Request::Apply(r) => self.apply(r).map(Response::Apply),
            Request::ParamDigest => Ok(Response::ParamDigest(DigestResponse {
                digest: param_digest(self.read().backend.params()),
            })),
            Request::Shutdown => {
                self.shutdown.store(true, Ordering::SeqCst);
                Ok(Response::Shutdown)
            }
        }
    }

    fn score(&self, r: &ScoreRequest) -> Result<ScoreResponse, ServiceError> {
        let s = self.read();
        let mut results = Vec::with_capacity(r.entries.len());
        for e in &r.entries {
            if e.candidates.is_empty() {
                return Err(ServiceError::Protocol("score entry with empty candidate list".into()));
            }
            if e.start > e.end || e.end > e.candidates.len() {
                return Err(ServiceError::Protocol(format!(
                    "range {}..{} outside {} candidates",
                    e.start,
                    e.end,
                    e.candidates.len()
                )));
            }
            let eval = s.backend.evaluate(&e.prompt, &e.candidates, e.start..e.end, e.want_value)?;
            results.push(ScoreResult {
                scores: eval.raw,
                value: eval.value,
            });
        }
        Ok(ScoreResponse { results })
    }

    fn value(&self, r: &ValueRequest) -> Result<ValueResponse, ServiceError> {
        let s = self.read();
        let candidates = if r.candidates.is_empty() {
            vec!["go forward".to_string()]
        } else {
            r.candidates.clone()
        };
        let values = r
            .prompts
            .iter()
            .map(|p| {
                let e = s.backend.evaluate(p, &candidates, 0..0, true)?;
                Ok(e.value.unwrap_or(0.0))
            })
            .collect::<Result<_, ServiceError>>()?;
        Ok(ValueResponse { values })
    }

    fn check_manifest(&self, s: &State, hash: &str) -> Result<(), ServiceError> {
        let own = s.backend.manifest().hash;
        if own != hash {
            return Err(ServiceError::Manifest {
                expected: hash.to_string(),
                got: own,
            });
        }
        Ok(())
    }

    fn update_grad(&self, r: &UpdateRequest) -> Result<GradResponse, ServiceError> {
        let s = self.read();
        self.check_manifest(&s, &r.manifest_hash)?;
        let mut grad = vec![0.0; s.backend.params().len()];
        let stats = batch_loss_grad(s.backend.as_ref(), &r.samples, &r.loss, &mut grad)
            .map_err(|e| ServiceError::Remote(e.to_string()))?;
        Ok(GradResponse { grad, stats })
    }

    fn apply(&self, r: &ApplyRequest) -> Result<ApplyResponse, ServiceError> {
        let mut guard = self.state.write().unwrap_or_else(|p| p.into_inner());
        let s = &mut *guard;
        self.check_manifest(s, &r.manifest_hash)?;
        if r.grad.len() != s.backend.params().len() {
            return Err(ServiceError::Protocol(format!(
                "gradient has {} entries, model has {}",
                r.grad.len(),
                s.backend.params().len()
            )));
        }
        let mut grad = r.grad.clone();
        let grad_norm = clip_grad_norm(&mut grad, r.max_grad_norm);
        s.adam.step(s.backend.params_mut(), &grad, r.lr);
        Ok(ApplyResponse {
            digest: param_digest(s.backend.params()),
            grad_norm,
        })
    }
}

impl Worker for InProcessWorker {
    fn call(&self, request: &Request) -> Result<Response, ServiceError> {
        Ok(self.handle(request))
    }

    fn describe(&self) -> String {
        format!("in-process:{}", self.name)
    }
}

/// Delays score requests by a fixed cost per call plus a cost per scored
/// candidate, standing in for a worker whose time is spent on an
/// accelerator rather than on the caller's CPU.
pub struct SimulatedLatency<W> {
    pub inner: W,
    pub per_call: Duration,
    pub per_candidate: Duration,
}

impl<W: Worker> Worker for SimulatedLatency<W> {
    fn call(&self, request: &Request) -> Result<Response, ServiceError> {
        if let Request::Score(r) = request {
            let n: usize = r.entries.iter().map(|e| e.end - e.start).sum();
            std::thread::sleep(self.per_call + self.per_candidate * n as u32);
        }
        self.inner.call(request)
    }

    fn describe(&self) -> String {
        format!("latency({})", self.inner.describe())
    }
}

impl<W: Worker + ?Sized> Worker for std::sync::Arc<W> {
    fn call(&self, request: &Request) -> Result<Response, ServiceError> {
        (**self).call(request)
    }

    fn describe(&self) -> String {
        (**self).describe()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::service::protocol::ScoreEntry;
    use crate::policy::UniformScorer;

    #[test]
    fn empty_candidates_get_error_response() {
        let w = InProcessWorker::new("w", Box::new(UniformScorer::new(10)), AdamConfig::default());
        let r = w.handle(&Request::Score(ScoreRequest {
            entries: vec![ScoreEntry {
                prompt: "p".into(),
                candidates: vec![],
                start: 0,
                end: 0,
                want_value: false,
            }],
        }));
        assert!(matches!(r, Response::Error(_)));
        // still serving
        assert!(matches!(w.handle(&Request::ParamDigest), Response::ParamDigest(_)));
    }
}
