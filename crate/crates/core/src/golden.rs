//! Checked-in prompt fixtures. Each case names an episode and the actions
//! taken in it; rendering the case must reproduce the stored text exactly.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::config::{ConfigError, LanguageConfig};
use crate::env::{ActionSpaceKind, EpisodeConfig, TaskFamily};
use crate::episode::TextEnv;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PromptCase {
    pub name: String,
    pub family: TaskFamily,
    #[serde(default)]
    pub action_space: ActionSpaceKind,
    #[serde(default = "default_distractors")]
    pub num_distractors: usize,
    #[serde(default)]
    pub language: LanguageConfig,
    pub seed: u64,
    /// Action indices applied before rendering.
    #[serde(default)]
    pub actions: Vec<usize>,
}

fn default_distractors() -> usize {
    EpisodeConfig::default().num_distractors
}

impl PromptCase {
    pub fn env_config(&self) -> EpisodeConfig {
        EpisodeConfig {
            action_space: self.action_space,
            num_distractors: self.num_distractors,
            task_families: vec![self.family],
            ..EpisodeConfig::default()
        }
    }

    pub fn render(&self) -> Result<String, ConfigError> {
        let invalid = |m: String| ConfigError::Invalid(format!("prompt case {}: {m}", self.name));
        let mut env = TextEnv::new(self.env_config(), self.language.lexicon()?, self.seed)
            .map_err(|e| invalid(e.to_string()))?;
        for (i, &a) in self.actions.iter().enumerate() {
            if a >= env.actions().len() || env.is_done() {
                return Err(invalid(format!("action {i} cannot be applied")));
            }
            env.step(a);
        }
        if env.is_done() {
            return Err(invalid("episode ended before rendering".into()));
        }
        Ok(env.prompt())
    }

    /// `<dir>/<name>.txt`
    pub fn fixture_path(&self, dir: &Path) -> PathBuf {
        dir.join(format!("{}.txt", self.name))
    }
}

pub fn load_cases(path: &Path) -> Result<Vec<PromptCase>, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|e| ConfigError::Io {
        path: path.to_path_buf(),
        message: e.to_string(),
    })?;
    serde_json::from_str(&text).map_err(|e| ConfigError::Parse(e.to_string()))
}

/// Tiny fixed model the checked-in protocol transcripts were recorded
/// against.
pub fn reference_worker(mode: crate::policy::PolicyMode) -> crate::service::InProcessWorker {
    use crate::policy::{BuiltinModel, ModelDims, PolicyMode, ScorerBackend, Vocab};
    let vocab = Vocab::from_lexicon(&crate::text::Lexicon::english());
    let backend: Box<dyn ScorerBackend> = match mode {
        PolicyMode::TokenScoring => Box::new(BuiltinModel::token_scorer(vocab, ModelDims::tiny(), 5)),
        PolicyMode::ActionHeads => Box::new(BuiltinModel::action_heads(vocab, 6, ModelDims::tiny(), 5)),
    };
    crate::service::InProcessWorker::new("reference", backend, crate::optim::AdamConfig::default())
}

/// Every message type, including the error paths, in an order that
/// exercises an update.
pub fn reference_exchange(worker: &crate::service::InProcessWorker) -> Vec<crate::service::TranscriptEntry> {
    use crate::service::protocol::{ApplyRequest, Frame, ScoreEntry, ScoreRequest, UpdateRequest, ValueRequest};
    use crate::service::{record_transcript, Request, Response};
    use crate::train::{LossConfig, Sample};

    let p0 = "Possible action of the agent: turn left, turn right, go forward, pick up, drop, toggle\n\
              Goal of the agent: go to the red ball\n\
              Obs. 0: You see a wall 2 steps forward, You see a red ball 1 step left\n\
              Action 0:";
    let p1 = "Possible action of the agent: turn left, turn right, go forward, pick up, drop, toggle\n\
              Goal of the agent: pick up a blue key\n\
              Obs. 0: You see a blue key 1 step forward\n\
              Action 0: go forward\n\
              Obs. 1: You see a blue key 0 steps forward\n\
              Action 1:";
    let cands: Vec<String> = crate::env::english_actions(crate::env::ActionSpaceKind::Canonical)
        .into_iter()
        .map(|a| a.display)
        .collect();
    let hello = match worker.handle(&Request::Hello) {
        Response::Hello(h) => h,
        other => panic!("reference worker refused HELLO: {other:?}"),
    };
    let hash = hello.manifest.hash.clone();
    let samples = vec![
        Sample {
            prompt: p0.into(),
            candidates: cands.clone(),
            action: 0,
            old_logprob: -1.7,
            advantage: 0.5,
            ret: 1.0,
        },
        Sample {
            prompt: p1.into(),
            candidates: cands.clone(),
            action: 3,
            old_logprob: -1.9,
            advantage: -0.25,
            ret: 0.0,
        },
    ];
    let update = Request::UpdateGrad(UpdateRequest {
        manifest_hash: hash.clone(),
        loss: LossConfig::default(),
        samples,
    });
    let grad = match worker.handle(&update) {
        Response::UpdateGrad(g) => g.grad,
        other => panic!("reference worker refused UPDATE_GRAD: {other:?}"),
    };
    let score = Request::Score(ScoreRequest {
        entries: vec![
            ScoreEntry {
                prompt: p0.into(),
                candidates: cands.clone(),
                start: 0,
                end: 6,
                want_value: true,
            },
            ScoreEntry {
                prompt: p1.into(),
                candidates: cands.clone(),
                start: 2,
                end: 5,
                want_value: false,
            },
        ],
    });
    let requests = vec![
        Request::Hello,
        Request::ParamDigest,
        score.clone(),
        Request::Value(ValueRequest {
            prompts: vec![p0.into(), p1.into()],
            candidates: cands.clone(),
        }),
        Request::Score(ScoreRequest {
            entries: vec![ScoreEntry {
                prompt: p0.into(),
                candidates: Vec::new(),
                start: 0,
                end: 0,
                want_value: false,
            }],
        }),
        update,
        Request::UpdateGrad(UpdateRequest {
            manifest_hash: "0000".into(),
            loss: LossConfig::bc(Default::default()),
            samples: Vec::new(),
        }),
        Request::Apply(ApplyRequest {
            manifest_hash: hash,
            grad,
            lr: 1e-3,
            max_grad_norm: 0.5,
        }),
        Request::ParamDigest,
        score,
        Request::Shutdown,
    ];
    let mut entries = record_transcript(worker, &requests);
    let bogus = Frame {
        id: entries.len() as u64 + 1,
        kind: "BOGUS".into(),
        payload: serde_json::Value::Null,
    };
    entries.insert(
        entries.len() - 1,
        crate::service::TranscriptEntry {
            response: worker.handle_frame(bogus.clone()),
            request: bogus,
        },
    );
    entries
}
