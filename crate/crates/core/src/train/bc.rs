use std::io::{BufRead, Write};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{batch_loss_grad, LossConfig, Sample, TrainError};
use crate::env::seed::streams;
use crate::env::{derive_seed, EpisodeConfig};
use crate::episode::TextEnv;
use crate::optim::{clip_grad_norm, Adam, AdamConfig};
use crate::policy::{action_distribution, greedy_action, sample_action, Normalization, PolicyConfig, ScorerBackend};
use crate::text::Lexicon;

/// One (prompt, action) pair.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BcRecord {
    pub prompt: String,
    pub candidates: Vec<String>,
    pub action: usize,
    pub action_text: String,
    pub episode: u64,
    pub done: bool,
    pub success: bool,
}

impl BcRecord {
    pub fn to_sample(&self) -> Sample {
        Sample {
            prompt: self.prompt.clone(),
            candidates: self.candidates.clone(),
            action: self.action,
            old_logprob: 0.0,
            advantage: 0.0,
            ret: 0.0,
        }
    }
}

/// Who picks the actions while collecting.
#[derive(Clone, Copy)]
pub enum BcSource<'a> {
    OracleBot,
    Policy {
        backend: &'a dyn ScorerBackend,
        normalization: Normalization,
        greedy: bool,
    },
}

/// Roll out `source` and record exactly `n` transitions. Episodes use seeds
/// from the collection stream of `seed`; the last episode may be cut short.
pub fn collect_bc_dataset(
    source: BcSource<'_>,
    env_config: &EpisodeConfig,
    lexicon: &Lexicon,
    n: usize,
    seed: u64,
) -> Result<Vec<BcRecord>, TrainError> {
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, streams::POLICY_SAMPLING, 0));
    let mut episode = 0u64;
    let mut env = TextEnv::new(
        env_config.clone(),
        lexicon.clone(),
        derive_seed(seed, streams::BC_COLLECT, episode),
    )?;
    let candidates = env.action_displays();
    let mut out = Vec::with_capacity(n);
    while out.len() < n {
        let prompt = env.prompt();
        let action = match source {
            BcSource::OracleBot => env.bot_action().map_err(|e| TrainError::Config(e.to_string()))?,
            BcSource::Policy {
                backend,
                normalization,
                greedy,
            } => {
                let e = backend.evaluate(&prompt, &candidates, 0..candidates.len(), false)?;
                let dist = action_distribution(
                    &e.raw,
                    PolicyConfig {
                        normalization,
                        mode: backend.mode(),
                    },
                )?;
                if greedy {
                    greedy_action(&dist.probs)
                } else {
                    sample_action(&dist.probs, &mut rng)
                }
            }
        };
        let outcome = env.step(action);
        out.push(BcRecord {
            prompt,
            candidates: candidates.clone(),
            action,
            action_text: candidates[action].clone(),
            episode,
            done: outcome.done,
            success: outcome.success,
        });
        if outcome.done {
            episode += 1;
            env.reset(derive_seed(seed, streams::BC_COLLECT, episode))?;
        }
    }
    Ok(out)
}

pub fn write_dataset<W: Write + ?Sized>(out: &mut W, records: &[BcRecord]) -> std::io::Result<()> {
    for r in records {
        serde_json::to_writer(&mut *out, r)?;
        out.write_all(b"\n")?;
    }
    out.flush()
}

pub fn read_dataset<R: BufRead>(input: R) -> Result<Vec<BcRecord>, TrainError> {
    let mut out = Vec::new();
    for (i, line) in input.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|e| TrainError::Config(format!("dataset line {}: {e}", i + 1)))?);
    }
    Ok(out)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BcConfig {
    pub dataset_size: usize,
    pub epochs: usize,
    pub lr: f64,
    pub batch_size: usize,
    pub max_grad_norm: f64,
    pub normalization: Normalization,
    pub adam: AdamConfig,
}

impl Default for BcConfig {
    fn default() -> Self {
        Self {
            dataset_size: 400_000,
            epochs: 1,
            lr: 5e-4,
            batch_size: 64,
            max_grad_norm: 0.5,
            normalization: Normalization::default(),
            adam: AdamConfig::default(),
        }
    }
}

impl BcConfig {
    pub fn validate(&self) -> Result<(), String> {
        if self.dataset_size == 0 || self.epochs == 0 || self.batch_size == 0 {
            return Err("bc.dataset_size, bc.epochs and bc.batch_size must be positive".into());
        }
        if !(self.lr > 0.0) || !(self.max_grad_norm > 0.0) {
            return Err("bc.lr and bc.max_grad_norm must be positive".into());
        }
        self.adam.validate()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BcStep {
    pub step: u64,
    pub epoch: usize,
    pub loss: f64,
    pub grad_norm: f64,
}

/// Minimize the negative log-likelihood of the recorded actions.
/// Shuffling is driven by `seed`.
pub fn train_bc(
    dataset: &[BcRecord],
    backend: &mut dyn ScorerBackend,
    cfg: &BcConfig,
    seed: u64,
    on_step: &mut dyn FnMut(&BcStep),
) -> Result<Vec<BcStep>, TrainError> {
    cfg.validate().map_err(TrainError::Config)?;
    for r in dataset {
        if r.action >= r.candidates.len() {
            return Err(TrainError::Label {
                action: r.action,
                candidates: r.candidates.len(),
            });
        }
    }
    let loss = LossConfig::bc(cfg.normalization);
    let mut adam = Adam::new(cfg.adam, backend.params().len());
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, streams::MINIBATCH_SHUFFLE, 0));
    let mut order: Vec<usize> = (0..dataset.len()).collect();
    let mut grad = vec![0.0; backend.params().len()];
    let mut steps = Vec::new();
    let mut step = 0u64;
    for epoch in 0..cfg.epochs {
        order.shuffle(&mut rng);
        for chunk in order.chunks(cfg.batch_size) {
            let batch: Vec<Sample> = chunk.iter().map(|&k| dataset[k].to_sample()).collect();
            grad.iter_mut().for_each(|g| *g = 0.0);
            let stats = batch_loss_grad(backend, &batch, &loss, &mut grad)?;
            let grad_norm = clip_grad_norm(&mut grad, cfg.max_grad_norm);
            adam.step(backend.params_mut(), &grad, cfg.lr);
            step += 1;
            let s = BcStep {
                step,
                epoch,
                loss: stats.total,
                grad_norm,
            };
            on_step(&s);
            steps.push(s);
        }
    }
    Ok(steps)
}

/// Mean NLL of the recorded actions under `backend`.
pub fn bc_loss(dataset: &[BcRecord], backend: &dyn ScorerBackend, normalization: Normalization) -> Result<f64, TrainError> {
    let samples: Vec<Sample> = dataset.iter().map(BcRecord::to_sample).collect();
    super::batch_loss(backend, &samples, &LossConfig::bc(normalization))
}
