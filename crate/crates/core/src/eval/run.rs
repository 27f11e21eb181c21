use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{ci_over_seeds, EvalError};
use crate::env::seed::streams;
use crate::env::{derive_seed, EpisodeConfig, TaskFamily};
use crate::episode::TextEnv;
use crate::policy::{action_distribution, greedy_action, sample_action, Normalization, PolicyConfig, ScorerBackend};
use crate::text::Lexicon;

const EVAL_SAMPLING: u64 = streams::EVAL + 1;

/// Who acts during evaluation.
#[derive(Clone, Copy)]
pub enum Agent<'a> {
    /// Uniform over the action space.
    Random,
    /// The oracle planner.
    Bot,
    Policy {
        backend: &'a dyn ScorerBackend,
        normalization: Normalization,
        greedy: bool,
    },
}

impl Agent<'_> {
    pub fn name(&self) -> String {
        match self {
            Agent::Random => "random".into(),
            Agent::Bot => "bot".into(),
            Agent::Policy { backend, greedy, .. } => {
                format!("{}{}", backend.kind(), if *greedy { "/greedy" } else { "" })
            }
        }
    }

    /// Index of the next action in `env`.
    pub fn act(&self, env: &TextEnv, rng: &mut ChaCha8Rng) -> Result<usize, EvalError> {
        match self {
            Agent::Random => Ok(rng.gen_range(0..env.actions().len())),
            Agent::Bot => env.bot_action().map_err(|e| EvalError::Bot(e.to_string())),
            Agent::Policy {
                backend,
                normalization,
                greedy,
            } => {
                let candidates = env.action_displays();
                let e = backend.evaluate(&env.prompt(), &candidates, 0..candidates.len(), false)?;
                let dist = action_distribution(
                    &e.raw,
                    PolicyConfig {
                        normalization: *normalization,
                        mode: backend.mode(),
                    },
                )?;
                Ok(if *greedy {
                    greedy_action(&dist.probs)
                } else {
                    sample_action(&dist.probs, rng)
                })
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpisodeResult {
    pub seed: u64,
    pub episode: usize,
    pub env_seed: u64,
    pub family: TaskFamily,
    pub success: bool,
    pub reward: f64,
    pub steps: u32,
}

/// Play one episode to the end.
pub fn play_episode(agent: &Agent<'_>, env: &mut TextEnv, rng: &mut ChaCha8Rng) -> Result<(bool, f64, u32), EvalError> {
    let mut total = 0.0;
    loop {
        let a = agent.act(env, rng)?;
        let o = env.step(a);
        total += o.reward;
        if o.done {
            return Ok((o.success, total, o.steps_used));
        }
    }
}

/// Run `n_episodes` for each evaluation seed. Episode `i` of seed `s` is
/// the same whatever the agent, so agents are compared on identical levels.
pub fn evaluate_episodes(
    agent: &Agent<'_>,
    env_config: &EpisodeConfig,
    lexicon: &Lexicon,
    n_episodes: usize,
    seeds: &[u64],
) -> Result<Vec<EpisodeResult>, EvalError> {
    if n_episodes == 0 || seeds.is_empty() {
        return Err(EvalError::Domain("evaluation needs at least one episode and one seed".into()));
    }
    env_config.validate().map_err(EvalError::Domain)?;
    let jobs: Vec<(u64, usize)> = seeds.iter().flat_map(|&s| (0..n_episodes).map(move |i| (s, i))).collect();
    jobs.par_iter()
        .map(|&(seed, i)| {
            let env_seed = derive_seed(seed, streams::EVAL, i as u64);
            let mut env = TextEnv::new(env_config.clone(), lexicon.clone(), env_seed)?;
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, EVAL_SAMPLING, i as u64));
            let (success, reward, steps) = play_episode(agent, &mut env, &mut rng)?;
            Ok(EpisodeResult {
                seed,
                episode: i,
                env_seed,
                family: env.task().family,
                success,
                reward,
                steps,
            })
        })
        .collect()
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TaskStats {
    pub episodes: usize,
    pub successes: usize,
    pub success_rate: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub agent: String,
    pub episodes: usize,
    pub seeds: Vec<u64>,
    pub success_rate: f64,
    pub per_task: BTreeMap<TaskFamily, TaskStats>,
    pub per_seed: Vec<f64>,
    /// 99% half width over seeds; absent with a single seed.
    pub ci_half_width: Option<f64>,
    pub mean_return: f64,
    pub mean_steps: f64,
}

impl EvalReport {
    pub fn from_episodes(agent: String, seeds: &[u64], results: &[EpisodeResult]) -> Self {
        let n = results.len().max(1) as f64;
        let mut per_task: BTreeMap<TaskFamily, TaskStats> = BTreeMap::new();
        for r in results {
            let t = per_task.entry(r.family).or_default();
            t.episodes += 1;
            t.successes += usize::from(r.success);
        }
        for t in per_task.values_mut() {
            t.success_rate = t.successes as f64 / t.episodes as f64;
        }
        let per_seed: Vec<f64> = seeds
            .iter()
            .map(|&s| {
                let mine: Vec<_> = results.iter().filter(|r| r.seed == s).collect();
                mine.iter().filter(|r| r.success).count() as f64 / mine.len().max(1) as f64
            })
            .collect();
        EvalReport {
            agent,
            episodes: results.len(),
            seeds: seeds.to_vec(),
            success_rate: results.iter().filter(|r| r.success).count() as f64 / n,
            per_task,
            ci_half_width: ci_over_seeds(&per_seed).ok().map(|(_, h)| h),
            per_seed,
            mean_return: results.iter().map(|r| r.reward).sum::<f64>() / n,
            mean_steps: results.iter().map(|r| f64::from(r.steps)).sum::<f64>() / n,
        }
    }
}

pub fn run_eval(
    agent: &Agent<'_>,
    env_config: &EpisodeConfig,
    lexicon: &Lexicon,
    n_episodes: usize,
    seeds: &[u64],
) -> Result<EvalReport, EvalError> {
    let results = evaluate_episodes(agent, env_config, lexicon, n_episodes, seeds)?;
    Ok(EvalReport::from_episodes(agent.name(), seeds, &results))
}
