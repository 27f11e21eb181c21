use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{normalize_advantages, LossConfig, LossKind, LossStats, RolloutBuffer, Sample, TrainError, Transition};
use crate::env::seed::streams;
use crate::env::{derive_seed, EpisodeConfig};
use crate::episode::TextEnv;
use crate::optim::{clip_grad_norm, Adam, AdamConfig};
use crate::policy::{
    action_distribution, param_digest, sample_action, Checkpoint, Normalization, PolicyConfig, ScorerBackend,
};
use crate::service::{Dispatcher, ScoreItem, ServiceError};
use crate::text::Lexicon;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PpoConfig {
    pub num_envs: usize,
    pub steps_per_env: usize,
    pub epochs: usize,
    pub batch_size: usize,
    pub lr: f64,
    pub max_grad_norm: f64,
    pub gamma: f64,
    pub gae_lambda: f64,
    pub clip_eps: f64,
    pub vf_coef: f64,
    pub entropy_coef: f64,
    pub advantage_normalization: bool,
    pub normalization: Normalization,
    pub adam: AdamConfig,
}

impl Default for PpoConfig {
    fn default() -> Self {
        Self {
            num_envs: 32,
            steps_per_env: 40,
            epochs: 4,
            batch_size: 64,
            lr: 3e-4,
            max_grad_norm: 0.5,
            gamma: 0.99,
            gae_lambda: 0.99,
            clip_eps: 0.2,
            vf_coef: 0.5,
            entropy_coef: 0.01,
            advantage_normalization: true,
            normalization: Normalization::default(),
            adam: AdamConfig::default(),
        }
    }
}

impl PpoConfig {
    /// Environment steps collected between two updates.
    pub fn steps_per_update(&self) -> usize {
        self.num_envs * self.steps_per_env
    }

    pub fn loss(&self) -> LossConfig {
        LossConfig {
            kind: LossKind::Ppo,
            clip_eps: self.clip_eps,
            vf_coef: self.vf_coef,
            entropy_coef: self.entropy_coef,
            normalization: self.normalization,
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        let positive = [
            ("num_envs", self.num_envs as f64),
            ("steps_per_env", self.steps_per_env as f64),
            ("epochs", self.epochs as f64),
            ("batch_size", self.batch_size as f64),
            ("lr", self.lr),
            ("max_grad_norm", self.max_grad_norm),
            ("gamma", self.gamma),
            ("gae_lambda", self.gae_lambda),
            ("clip_eps", self.clip_eps),
        ];
        for (name, v) in positive {
            if !(v > 0.0) || !v.is_finite() {
                return Err(format!("ppo.{name} must be positive, got {v}"));
            }
        }
        if self.clip_eps >= 1.0 {
            return Err(format!("ppo.clip_eps must be below 1, got {}", self.clip_eps));
        }
        if self.gamma > 1.0 || self.gae_lambda > 1.0 {
            return Err("ppo.gamma and ppo.gae_lambda must not exceed 1".into());
        }
        if self.vf_coef < 0.0 || self.entropy_coef < 0.0 {
            return Err("ppo loss coefficients must be non-negative".into());
        }
        self.adam.validate()
    }
}

/// One line of the training metrics stream.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct UpdateMetrics {
    pub update: u64,
    pub env_steps: u64,
    pub episodes: usize,
    /// Success rate over episodes that finished during this collection,
    /// `None` when none did.
    pub success_rate: Option<f64>,
    pub mean_return: Option<f64>,
    pub mean_episode_length: Option<f64>,
    pub policy_loss: f64,
    pub value_loss: f64,
    pub entropy: f64,
    pub total_loss: f64,
    pub approx_kl: f64,
    pub clip_frac: f64,
    pub grad_norm: f64,
    pub digest: String,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub probes: Vec<Vec<f64>>,
}

#[derive(Clone, Debug, Default)]
struct EpisodeTally {
    episodes: usize,
    successes: usize,
    returns: f64,
    lengths: u64,
}

/// Everything besides parameters and optimizer moments needed to resume.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
struct TrainerState {
    master_seed: u64,
    config: PpoConfig,
    env_config: EpisodeConfig,
    update: u64,
    env_steps: u64,
    episode_counters: Vec<u64>,
    envs: Vec<TextEnv>,
    returns: Vec<f64>,
}

/// Synchronous PPO over a pool of text environments. Scoring and gradient
/// computation go through a [`Dispatcher`]; the trainer keeps its own copy
/// of the parameters, stepped with the same averaged gradient, so it can
/// checkpoint without asking workers for their weights.
pub struct PpoTrainer {
    cfg: PpoConfig,
    env_config: EpisodeConfig,
    master_seed: u64,
    envs: Vec<TextEnv>,
    episode_counters: Vec<u64>,
    // running undiscounted return of each environment's current episode
    returns: Vec<f64>,
    master: Box<dyn ScorerBackend>,
    adam: Adam,
    dispatcher: Dispatcher,
    manifest_hash: String,
    update: u64,
    env_steps: u64,
    probes: Vec<ScoreItem>,
}

impl std::fmt::Debug for PpoTrainer {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("PpoTrainer")
            .field("update", &self.update)
            .field("env_steps", &self.env_steps)
            .finish_non_exhaustive()
    }
}

fn service(e: ServiceError) -> TrainError {
    TrainError::Service(e.to_string())
}

impl PpoTrainer {
    /// Fresh trainer with `workers` in-process scorer replicas.
    pub fn new(
        env_config: EpisodeConfig,
        lexicon: Lexicon,
        backend: Box<dyn ScorerBackend>,
        cfg: PpoConfig,
        master_seed: u64,
        workers: usize,
    ) -> Result<Self, TrainError> {
        let adam = Adam::new(cfg.adam, backend.params().len());
        let dispatcher = Dispatcher::in_process(backend.as_ref(), &adam, workers.max(1)).map_err(service)?;
        Self::with_dispatcher(env_config, lexicon, backend, adam, cfg, master_seed, dispatcher)
    }

    /// Fresh trainer over an existing worker pool, which must already hold
    /// the parameters of `backend`.
    pub fn with_dispatcher(
        env_config: EpisodeConfig,
        lexicon: Lexicon,
        backend: Box<dyn ScorerBackend>,
        adam: Adam,
        cfg: PpoConfig,
        master_seed: u64,
        dispatcher: Dispatcher,
    ) -> Result<Self, TrainError> {
        cfg.validate().map_err(TrainError::Config)?;
        env_config.validate().map_err(TrainError::Config)?;
        let envs = (0..cfg.num_envs)
            .map(|i| {
                let seed = derive_seed(master_seed, streams::TRAIN_ENVS + i as u64, 0);
                TextEnv::new(env_config.clone(), lexicon.clone(), seed)
            })
            .collect::<Result<Vec<_>, _>>()?;
        let trainer = Self {
            episode_counters: vec![1; cfg.num_envs],
            returns: vec![0.0; cfg.num_envs],
            manifest_hash: backend.manifest().hash,
            cfg,
            env_config,
            master_seed,
            envs,
            master: backend,
            adam,
            dispatcher,
            update: 0,
            env_steps: 0,
            probes: Vec::new(),
        };
        trainer.check_workers()?;
        Ok(trainer)
    }

    /// Restore from a checkpoint written by [`PpoTrainer::checkpoint`].
    pub fn resume(checkpoint: Checkpoint, workers: usize) -> Result<Self, TrainError> {
        let state: TrainerState = serde_json::from_value(checkpoint.extra.clone())
            .map_err(|e| TrainError::Config(format!("checkpoint has no trainer state: {e}")))?;
        let adam = checkpoint
            .optimizer
            .clone()
            .ok_or_else(|| TrainError::Config("checkpoint has no optimizer state".into()))?;
        let backend = checkpoint.into_backend()?;
        let dispatcher = Dispatcher::in_process(backend.as_ref(), &adam, workers.max(1)).map_err(service)?;
        Self::resume_with(state, backend, adam, dispatcher)
    }

    /// Restore over an existing worker pool holding the checkpoint's parameters.
    pub fn resume_with_dispatcher(checkpoint: Checkpoint, dispatcher: Dispatcher) -> Result<Self, TrainError> {
        let state: TrainerState = serde_json::from_value(checkpoint.extra.clone())
            .map_err(|e| TrainError::Config(format!("checkpoint has no trainer state: {e}")))?;
        let adam = checkpoint
            .optimizer
            .clone()
            .ok_or_else(|| TrainError::Config("checkpoint has no optimizer state".into()))?;
        let backend = checkpoint.into_backend()?;
        Self::resume_with(state, backend, adam, dispatcher)
    }

    fn resume_with(
        state: TrainerState,
        backend: Box<dyn ScorerBackend>,
        adam: Adam,
        dispatcher: Dispatcher,
    ) -> Result<Self, TrainError> {
        if state.envs.len() != state.config.num_envs {
            return Err(TrainError::Config("checkpoint environment count disagrees with its config".into()));
        }
        let trainer = Self {
            cfg: state.config,
            env_config: state.env_config,
            master_seed: state.master_seed,
            envs: state.envs,
            episode_counters: state.episode_counters,
            returns: state.returns,
            manifest_hash: backend.manifest().hash,
            master: backend,
            adam,
            dispatcher,
            update: state.update,
            env_steps: state.env_steps,
            probes: Vec::new(),
        };
        trainer.check_workers()?;
        Ok(trainer)
    }

    fn check_workers(&self) -> Result<(), TrainError> {
        let own = param_digest(self.master.params());
        for h in self.dispatcher.hello().map_err(service)? {
            if h.manifest.hash != self.manifest_hash {
                return Err(TrainError::Service(format!(
                    "worker manifest {} does not match model {}",
                    h.manifest.hash, self.manifest_hash
                )));
            }
            if h.digest != own {
                return Err(TrainError::Service("worker parameters differ from the trainer's".into()));
            }
        }
        Ok(())
    }

    /// Prompts scored after every update and reported in the metrics.
    pub fn set_probes(&mut self, probes: Vec<ScoreItem>) {
        self.probes = probes;
    }

    pub fn config(&self) -> &PpoConfig {
        &self.cfg
    }

    pub fn env_config(&self) -> &EpisodeConfig {
        &self.env_config
    }

    pub fn update_count(&self) -> u64 {
        self.update
    }

    pub fn env_steps(&self) -> u64 {
        self.env_steps
    }

    pub fn backend(&self) -> &dyn ScorerBackend {
        self.master.as_ref()
    }

    pub fn optimizer(&self) -> &Adam {
        &self.adam
    }

    pub fn dispatcher(&self) -> &Dispatcher {
        &self.dispatcher
    }

    pub fn checkpoint(&self) -> Checkpoint {
        let state = TrainerState {
            master_seed: self.master_seed,
            config: self.cfg,
            env_config: self.env_config.clone(),
            update: self.update,
            env_steps: self.env_steps,
            episode_counters: self.episode_counters.clone(),
            envs: self.envs.clone(),
            returns: self.returns.clone(),
        };
        Checkpoint::capture(
            self.master.as_ref(),
            Some(&self.adam),
            serde_json::to_value(state).expect("trainer state serializes"),
        )
    }

    fn policy_config(&self) -> PolicyConfig {
        PolicyConfig {
            normalization: self.cfg.normalization,
            mode: self.master.mode(),
        }
    }

    fn collect(&mut self, buffer: &mut RolloutBuffer) -> Result<(EpisodeTally, Vec<f64>), TrainError> {
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(self.master_seed, streams::POLICY_SAMPLING, self.update));
        let pc = self.policy_config();
        let mut tally = EpisodeTally::default();
        for (i, env) in self.envs.iter().enumerate() {
            buffer.set_candidates(i, env.action_displays());
        }
        for _ in 0..self.cfg.steps_per_env {
            let items: Vec<ScoreItem> = self
                .envs
                .iter()
                .map(|e| ScoreItem::new(e.prompt(), e.action_displays()))
                .collect();
            let evals = self.dispatcher.score(&items, true).map_err(service)?;
            for (i, (item, eval)) in items.into_iter().zip(evals).enumerate() {
                let dist = action_distribution(&eval.raw, pc)?;
                let action = sample_action(&dist.probs, &mut rng);
                let value = eval
                    .value
                    .ok_or_else(|| TrainError::Shape("scorer returned no value estimate".into()))?;
                let outcome = self.envs[i].step(action);
                self.returns[i] += outcome.reward;
                buffer.push(
                    i,
                    Transition {
                        prompt: item.prompt,
                        action,
                        old_logprob: dist.logprobs[action],
                        value,
                        reward: outcome.reward,
                        done: outcome.done,
                        success: outcome.success,
                    },
                )?;
                if outcome.done {
                    tally.episodes += 1;
                    tally.successes += usize::from(outcome.success);
                    tally.returns += self.returns[i];
                    tally.lengths += u64::from(outcome.steps_used);
                    self.returns[i] = 0.0;
                    let k = self.episode_counters[i];
                    self.episode_counters[i] += 1;
                    self.envs[i].reset(derive_seed(self.master_seed, streams::TRAIN_ENVS + i as u64, k))?;
                }
            }
        }
        self.env_steps += buffer.len() as u64;
        // environments whose last step was terminal have already been reset,
        // and their bootstrap value is ignored by GAE
        let prompts: Vec<String> = self.envs.iter().map(|e| e.prompt()).collect();
        let bootstrap = self
            .dispatcher
            .value(&prompts, &self.envs[0].action_displays())
            .map_err(service)?;
        Ok((tally, bootstrap))
    }

    fn optimize(&mut self, mut samples: Vec<Sample>) -> Result<(LossStats, f64, String), TrainError> {
        let loss = self.cfg.loss();
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(self.master_seed, streams::MINIBATCH_SHUFFLE, self.update));
        let mut stats = Vec::new();
        let mut norms = Vec::new();
        let mut digest = param_digest(self.master.params());
        let mut order: Vec<usize> = (0..samples.len()).collect();
        for _ in 0..self.cfg.epochs {
            order.shuffle(&mut rng);
            for chunk in order.chunks(self.cfg.batch_size) {
                let mut batch: Vec<Sample> = chunk.iter().map(|&k| samples[k].clone()).collect();
                if self.cfg.advantage_normalization {
                    normalize_advantages(&mut batch);
                }
                let (mut grad, s, _) = self
                    .dispatcher
                    .gradient(&batch, &loss, &self.manifest_hash)
                    .map_err(service)?;
                let applied = self
                    .dispatcher
                    .apply(&grad, self.cfg.lr, self.cfg.max_grad_norm, &self.manifest_hash)
                    .map_err(service)?;
                let norm = clip_grad_norm(&mut grad, self.cfg.max_grad_norm);
                self.adam.step(self.master.params_mut(), &grad, self.cfg.lr);
                digest = param_digest(self.master.params());
                if digest != applied.digest {
                    return Err(TrainError::Service(format!(
                        "workers hold {} after update, trainer holds {digest}",
                        applied.digest
                    )));
                }
                stats.push(s);
                norms.push(norm);
            }
        }
        samples.clear();
        let mean_norm = norms.iter().sum::<f64>() / norms.len().max(1) as f64;
        Ok((LossStats::merge(&stats), mean_norm, digest))
    }

    /// Score the probe prompts with the current parameters.
    pub fn probe(&self) -> Result<Vec<Vec<f64>>, TrainError> {
        if self.probes.is_empty() {
            return Ok(Vec::new());
        }
        let pc = self.policy_config();
        self.probes
            .iter()
            .map(|p| {
                let e = self.master.evaluate(&p.prompt, &p.candidates, 0..p.candidates.len(), false)?;
                Ok(action_distribution(&e.raw, pc)?.probs)
            })
            .collect()
    }

    /// Collect one buffer, compute advantages and run the PPO epochs.
    pub fn step_update(&mut self) -> Result<UpdateMetrics, TrainError> {
        let mut buffer = RolloutBuffer::new(self.cfg.num_envs, self.cfg.steps_per_env);
        let (tally, bootstrap) = self.collect(&mut buffer)?;
        let samples = buffer.samples(&bootstrap, self.cfg.gamma, self.cfg.gae_lambda)?;
        let (stats, grad_norm, digest) = self.optimize(samples)?;
        self.update += 1;
        let per_episode = |x: f64| (tally.episodes > 0).then(|| x / tally.episodes as f64);
        Ok(UpdateMetrics {
            update: self.update,
            env_steps: self.env_steps,
            episodes: tally.episodes,
            success_rate: per_episode(tally.successes as f64),
            mean_return: per_episode(tally.returns),
            mean_episode_length: per_episode(tally.lengths as f64),
            policy_loss: stats.policy_loss,
            value_loss: stats.value_loss,
            entropy: stats.entropy,
            total_loss: stats.total,
            approx_kl: stats.approx_kl,
            clip_frac: stats.clip_frac,
            grad_norm,
            digest,
            probes: self.probe()?,
        })
    }

    /// Run updates until at least `total_steps` environment steps have been
    /// collected. `on_update` sees every metrics record and may stop the run
    /// early by returning `false`.
    pub fn train(
        &mut self,
        total_steps: u64,
        on_update: &mut dyn FnMut(&UpdateMetrics, &PpoTrainer) -> bool,
    ) -> Result<Vec<UpdateMetrics>, TrainError> {
        let mut out = Vec::new();
        while self.env_steps < total_steps {
            let m = self.step_update()?;
            let go_on = on_update(&m, self);
            out.push(m);
            if !go_on {
                break;
            }
        }
        Ok(out)
    }
}

/// Train a fresh backend with in-process workers and return the metrics stream.
pub fn train_ppo(
    env_config: EpisodeConfig,
    lexicon: Lexicon,
    backend: Box<dyn ScorerBackend>,
    cfg: PpoConfig,
    master_seed: u64,
    total_steps: u64,
) -> Result<(Box<dyn ScorerBackend>, Vec<UpdateMetrics>), TrainError> {
    let mut t = PpoTrainer::new(env_config, lexicon, backend, cfg, master_seed, 1)?;
    let metrics = t.train(total_steps, &mut |_, _| true)?;
    Ok((t.master, metrics))
}
