use std::sync::atomic::{AtomicBool, Ordering};

use super::protocol::{
    ApplyRequest, ApplyResponse, HelloResponse, Request, Response, ScoreEntry, ScoreRequest, UpdateRequest, ValueRequest,
};
use super::worker::{InProcessWorker, Worker};
use super::ServiceError;
use crate::optim::Adam;
use crate::policy::{Evaluation, ScorerBackend};
use crate::train::{LossConfig, LossStats, Sample};

/// A prompt with its candidate actions.
#[derive(Clone, Debug, PartialEq)]
pub struct ScoreItem {
    pub prompt: String,
    pub candidates: Vec<String>,
}

impl ScoreItem {
    pub fn new(prompt: impl Into<String>, candidates: Vec<String>) -> Self {
        Self {
            prompt: prompt.into(),
            candidates,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct UpdateSummary {
    pub stats: LossStats,
    /// Norm of the averaged gradient before clipping.
    pub grad_norm: f64,
    pub digest: String,
    pub shards: usize,
}

struct Slot {
    worker: Box<dyn Worker>,
    healthy: AtomicBool,
}

/// Fans score and update requests out over a pool of workers.
pub struct Dispatcher {
    slots: Vec<Slot>,
}

// where each entry of a score chunk came from
struct Piece {
    item: usize,
    start: usize,
    end: usize,
    want_value: bool,
}

fn expect_ok(r: Result<Response, ServiceError>) -> Result<Response, ServiceError> {
    match r? {
        Response::Error(m) => Err(ServiceError::Remote(m)),
        other => Ok(other),
    }
}

fn unexpected(r: &Response, wanted: &str) -> ServiceError {
    ServiceError::Protocol(format!("expected {wanted} reply, got {}", r.kind()))
}

fn bounds(total: usize, parts: usize, c: usize) -> (usize, usize) {
    (c * total / parts, (c + 1) * total / parts)
}

impl Dispatcher {
    pub fn new(workers: Vec<Box<dyn Worker>>) -> Result<Self, ServiceError> {
        if workers.is_empty() {
            return Err(ServiceError::NoWorkers);
        }
        Ok(Self {
            slots: workers
                .into_iter()
                .map(|worker| Slot {
                    worker,
                    healthy: AtomicBool::new(true),
                })
                .collect(),
        })
    }

    /// `n` in-process replicas of `backend`, each with a copy of `adam`.
    pub fn in_process(backend: &dyn ScorerBackend, adam: &Adam, n: usize) -> Result<Self, ServiceError> {
        let workers = (0..n)
            .map(|i| {
                Box::new(InProcessWorker::with_optimizer(format!("w{i}"), backend.clone_box(), adam.clone()))
                    as Box<dyn Worker>
            })
            .collect();
        Self::new(workers)
    }

    pub fn len(&self) -> usize {
        self.slots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.slots.is_empty()
    }

    pub fn healthy(&self) -> Vec<usize> {
        (0..self.slots.len())
            .filter(|&i| self.slots[i].healthy.load(Ordering::SeqCst))
            .collect()
    }

    pub fn mark_unhealthy(&self, i: usize) {
        self.slots[i].healthy.store(false, Ordering::SeqCst);
    }

    pub fn describe(&self) -> Vec<String> {
        self.slots.iter().map(|s| s.worker.describe()).collect()
    }

    fn call(&self, i: usize, req: &Request) -> Result<Response, ServiceError> {
        expect_ok(self.slots[i].worker.call(req))
    }

    /// Send each job to its worker concurrently; results come back in job order.
    fn call_many(&self, jobs: &[(usize, Request)]) -> Vec<Result<Response, ServiceError>> {
        if jobs.len() == 1 {
            return vec![self.call(jobs[0].0, &jobs[0].1)];
        }
        std::thread::scope(|s| {
            let handles: Vec<_> = jobs.iter().map(|(i, r)| s.spawn(move || self.call(*i, r))).collect();
            handles
                .into_iter()
                .map(|h| h.join().unwrap_or_else(|_| Err(ServiceError::Remote("worker thread panicked".into()))))
                .collect()
        })
    }

    fn live(&self) -> Result<Vec<usize>, ServiceError> {
        let h = self.healthy();
        if h.is_empty() {
            Err(ServiceError::NoWorkers)
        } else {
            Ok(h)
        }
    }

    /// HELLO every healthy worker and check that they agree on the manifest
    /// and parameters.
    pub fn hello(&self) -> Result<Vec<HelloResponse>, ServiceError> {
        let live = self.live()?;
        let jobs: Vec<_> = live.iter().map(|&i| (i, Request::Hello)).collect();
        let mut out = Vec::new();
        for r in self.call_many(&jobs) {
            match r? {
                Response::Hello(h) => out.push(h),
                other => return Err(unexpected(&other, "HELLO")),
            }
        }
        if let Some(first) = out.first() {
            if let Some(bad) = out.iter().find(|h| h.manifest != first.manifest) {
                return Err(ServiceError::Manifest {
                    expected: first.manifest.hash.clone(),
                    got: bad.manifest.hash.clone(),
                });
            }
            if out.iter().any(|h| h.digest != first.digest) {
                return Err(ServiceError::Diverged("parameter digests differ".into()));
            }
        }
        Ok(out)
    }

    pub fn digests(&self) -> Result<Vec<String>, ServiceError> {
        let jobs: Vec<_> = self.live()?.into_iter().map(|i| (i, Request::ParamDigest)).collect();
        self.call_many(&jobs)
            .into_iter()
            .map(|r| match r? {
                Response::ParamDigest(d) => Ok(d.digest),
                other => Err(unexpected(&other, "PARAM_DIGEST")),
            })
            .collect()
    }

    /// Score every candidate of every item. The flattened (prompt, candidate)
    /// pairs are cut into one contiguous chunk per healthy worker. A chunk
    /// whose worker fails is retried once on another worker.
    pub fn score(&self, items: &[ScoreItem], want_value: bool) -> Result<Vec<Evaluation>, ServiceError> {
        if let Some(i) = items.iter().position(|it| it.candidates.is_empty()) {
            return Err(ServiceError::Protocol(format!("item {i} has no candidates")));
        }
        let total: usize = items.iter().map(|it| it.candidates.len()).sum();
        let mut out: Vec<Evaluation> = items
            .iter()
            .map(|it| Evaluation {
                raw: Vec::with_capacity(it.candidates.len()),
                value: None,
            })
            .collect();
        if total == 0 {
            return Ok(out);
        }
        let live = self.live()?;
        let parts = live.len().min(total);

        let mut offsets = Vec::with_capacity(items.len() + 1);
        offsets.push(0);
        for it in items {
            offsets.push(offsets.last().unwrap() + it.candidates.len());
        }
        let mut chunks: Vec<(Vec<Piece>, Request)> = Vec::with_capacity(parts);
        for c in 0..parts {
            let (lo, hi) = bounds(total, parts, c);
            let mut pieces = Vec::new();
            let mut entries = Vec::new();
            for (k, it) in items.iter().enumerate() {
                let (a, b) = (offsets[k].max(lo), offsets[k + 1].min(hi));
                if a >= b {
                    continue;
                }
                let piece = Piece {
                    item: k,
                    start: a - offsets[k],
                    end: b - offsets[k],
                    want_value: want_value && a == offsets[k],
                };
                entries.push(ScoreEntry {
                    prompt: it.prompt.clone(),
                    candidates: it.candidates.clone(),
                    start: piece.start,
                    end: piece.end,
                    want_value: piece.want_value,
                });
                pieces.push(piece);
            }
            chunks.push((pieces, Request::Score(ScoreRequest { entries })));
        }

        let jobs: Vec<(usize, Request)> = chunks.iter().enumerate().map(|(c, (_, r))| (live[c], r.clone())).collect();
        let mut replies = self.call_many(&jobs);
        for (c, reply) in replies.iter_mut().enumerate() {
            let checked = reply.clone().and_then(|r| Self::check_score(&chunks[c].0, r));
            if let Err(e) = checked {
                let failed = live[c];
                self.mark_unhealthy(failed);
                let n = self.slots.len();
                let alt = self
                    .healthy()
                    .into_iter()
                    .filter(|&i| i != failed)
                    .min_by_key(|&i| (i + n - failed) % n);
                *reply = match alt {
                    Some(a) => {
                        let again = self.call(a, &chunks[c].1);
                        if again.is_err() {
                            self.mark_unhealthy(a);
                        }
                        again
                    }
                    None => Err(e),
                };
            }
        }
        for (c, reply) in replies.into_iter().enumerate() {
            let pieces = &chunks[c].0;
            let results = Self::check_score(pieces, reply?)?;
            for (p, r) in pieces.iter().zip(results) {
                out[p.item].raw.extend(r.scores);
                if p.want_value {
                    out[p.item].value = r.value;
                }
            }
        }
        Ok(out)
    }

    fn check_score(pieces: &[Piece], r: Response) -> Result<Vec<super::protocol::ScoreResult>, ServiceError> {
        let resp = match r {
            Response::Score(s) => s,
            other => return Err(unexpected(&other, "SCORE")),
        };
        if resp.results.len() != pieces.len() {
            return Err(ServiceError::Protocol(format!(
                "{} results for {} entries",
                resp.results.len(),
                pieces.len()
            )));
        }
        for (p, r) in pieces.iter().zip(&resp.results) {
            if r.scores.len() != p.end - p.start {
                return Err(ServiceError::Protocol(format!(
                    "{} scores for range {}..{}",
                    r.scores.len(),
                    p.start,
                    p.end
                )));
            }
            if p.want_value && r.value.is_none() {
                return Err(ServiceError::Protocol("missing value estimate".into()));
            }
        }
        Ok(resp.results)
    }

    /// Value estimates, prompts split evenly across healthy workers.
    pub fn value(&self, prompts: &[String], candidates: &[String]) -> Result<Vec<f64>, ServiceError> {
        if prompts.is_empty() {
            return Ok(Vec::new());
        }
        let live = self.live()?;
        let parts = live.len().min(prompts.len());
        let jobs: Vec<_> = (0..parts)
            .map(|c| {
                let (lo, hi) = bounds(prompts.len(), parts, c);
                (
                    live[c],
                    Request::Value(ValueRequest {
                        prompts: prompts[lo..hi].to_vec(),
                        candidates: candidates.to_vec(),
                    }),
                )
            })
            .collect();
        let mut out = Vec::with_capacity(prompts.len());
        for (c, r) in self.call_many(&jobs).into_iter().enumerate() {
            let (lo, hi) = bounds(prompts.len(), parts, c);
            match r? {
                Response::Value(v) if v.values.len() == hi - lo => out.extend(v.values),
                Response::Value(v) => {
                    return Err(ServiceError::Protocol(format!("{} values for {} prompts", v.values.len(), hi - lo)))
                }
                other => return Err(unexpected(&other, "VALUE")),
            }
        }
        Ok(out)
    }

    /// Gradient of the mean loss over `samples`: each healthy worker computes
    /// its shard's mean gradient and the results are averaged weighted by
    /// shard size. Any shard failure aborts the update.
    pub fn gradient(
        &self,
        samples: &[Sample],
        loss: &LossConfig,
        manifest_hash: &str,
    ) -> Result<(Vec<f64>, LossStats, usize), ServiceError> {
        if samples.is_empty() {
            return Err(ServiceError::Protocol("update with no samples".into()));
        }
        let live = self.live()?;
        let parts = live.len().min(samples.len());
        let jobs: Vec<_> = (0..parts)
            .map(|c| {
                let (lo, hi) = bounds(samples.len(), parts, c);
                (
                    live[c],
                    Request::UpdateGrad(UpdateRequest {
                        manifest_hash: manifest_hash.to_string(),
                        loss: *loss,
                        samples: samples[lo..hi].to_vec(),
                    }),
                )
            })
            .collect();
        let mut grad: Option<Vec<f64>> = None;
        let mut stats = Vec::with_capacity(parts);
        let n = samples.len() as f64;
        for (c, r) in self.call_many(&jobs).into_iter().enumerate() {
            let (lo, hi) = bounds(samples.len(), parts, c);
            let g = match r? {
                Response::UpdateGrad(g) => g,
                other => return Err(unexpected(&other, "UPDATE_GRAD")),
            };
            let w = (hi - lo) as f64 / n;
            match grad.as_mut() {
                None => grad = Some(g.grad.iter().map(|x| x * w).collect()),
                Some(acc) => {
                    if acc.len() != g.grad.len() {
                        return Err(ServiceError::Protocol("gradient lengths differ between workers".into()));
                    }
                    for (a, x) in acc.iter_mut().zip(&g.grad) {
                        *a += x * w;
                    }
                }
            }
            stats.push(g.stats);
        }
        Ok((grad.expect("at least one shard"), LossStats::merge(&stats), parts))
    }

    /// Broadcast an averaged gradient to every healthy worker and require
    /// identical parameter digests afterwards.
    pub fn apply(&self, grad: &[f64], lr: f64, max_grad_norm: f64, manifest_hash: &str) -> Result<ApplyResponse, ServiceError> {
        let live = self.live()?;
        let req = Request::Apply(ApplyRequest {
            manifest_hash: manifest_hash.to_string(),
            grad: grad.to_vec(),
            lr,
            max_grad_norm,
        });
        let jobs: Vec<_> = live.iter().map(|&i| (i, req.clone())).collect();
        let mut first: Option<ApplyResponse> = None;
        let mut failure = None;
        for (k, r) in self.call_many(&jobs).into_iter().enumerate() {
            match r {
                Ok(Response::Apply(a)) => match &first {
                    None => first = Some(a),
                    Some(f) if f.digest != a.digest => {
                        failure.get_or_insert(ServiceError::Diverged(format!(
                            "{} has {} but {} has {}",
                            self.slots[live[0]].worker.describe(),
                            f.digest,
                            self.slots[live[k]].worker.describe(),
                            a.digest
                        )));
                    }
                    Some(_) => {}
                },
                Ok(other) => {
                    self.mark_unhealthy(live[k]);
                    failure.get_or_insert(unexpected(&other, "APPLY"));
                }
                Err(e) => {
                    self.mark_unhealthy(live[k]);
                    failure.get_or_insert(ServiceError::Diverged(format!(
                        "apply failed on {}: {e}",
                        self.slots[live[k]].worker.describe()
                    )));
                }
            }
        }
        match failure {
            Some(e) => Err(e),
            None => first.ok_or(ServiceError::NoWorkers),
        }
    }

    /// One optimizer step: sharded gradient, then broadcast apply.
    pub fn update(
        &self,
        samples: &[Sample],
        loss: &LossConfig,
        lr: f64,
        max_grad_norm: f64,
        manifest_hash: &str,
    ) -> Result<UpdateSummary, ServiceError> {
        let (grad, stats, shards) = self.gradient(samples, loss, manifest_hash)?;
        let applied = self.apply(&grad, lr, max_grad_norm, manifest_hash)?;
        Ok(UpdateSummary {
            stats,
            grad_norm: applied.grad_norm,
            digest: applied.digest,
            shards,
        })
    }

    /// Ask every healthy worker to stop. Errors are ignored.
    pub fn shutdown(&self) {
        let jobs: Vec<_> = self.healthy().into_iter().map(|i| (i, Request::Shutdown)).collect();
        if !jobs.is_empty() {
            let _ = self.call_many(&jobs);
        }
    }
}
