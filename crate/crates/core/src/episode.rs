//! A text-facing environment: generated episode + renderer + prompt history.

use serde::{Deserialize, Serialize};

use crate::env::{
    generate_episode, oracle_bot_action, step, BotError, EpisodeConfig, GenerationError, GridState,
    StepOutcome, StepRules, TaskSpec, TextAction,
};
use crate::prompt::{build_prompt, HistoryBuffer};
use crate::text::{describe, goal_text, Lexicon, ObservationText};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TextEnv {
    config: EpisodeConfig,
    lexicon: Lexicon,
    actions: Vec<TextAction>,
    state: GridState,
    task: TaskSpec,
    rules: StepRules,
    goal: String,
    history: HistoryBuffer,
    seed: u64,
    done: bool,
}

impl TextEnv {
    /// Build and reset to the episode of `seed`.
    pub fn new(config: EpisodeConfig, lexicon: Lexicon, seed: u64) -> Result<Self, GenerationError> {
        let actions = lexicon.actions_for(config.action_space);
        let (state, task) = generate_episode(&config.with_seed(seed), &config.task_families)?;
        let mut env = Self {
            rules: config.rules(task.family),
            goal: goal_text(&task, &lexicon),
            config,
            lexicon,
            actions,
            state,
            task,
            history: HistoryBuffer::new(),
            seed,
            done: false,
        };
        env.history.reset(env.observe());
        Ok(env)
    }

    pub fn reset(&mut self, seed: u64) -> Result<(), GenerationError> {
        let (state, task) = generate_episode(&self.config.with_seed(seed), &self.config.task_families)?;
        self.rules = self.config.rules(task.family);
        self.goal = goal_text(&task, &self.lexicon);
        self.state = state;
        self.task = task;
        self.seed = seed;
        self.done = false;
        let first = self.observe();
        self.history.reset(first);
        Ok(())
    }

    pub fn observe(&self) -> ObservationText {
        describe(&self.state, &self.lexicon)
    }

    pub fn prompt(&self) -> String {
        build_prompt(&self.actions, &self.goal, &self.history).expect("non-empty actions and history")
    }

    /// Apply the action at `index` of [`TextEnv::actions`].
    pub fn step(&mut self, index: usize) -> StepOutcome {
        assert!(!self.done, "step called on a finished episode");
        let action = &self.actions[index];
        let (next, outcome) = step(&self.state, &self.task, action, &self.rules);
        self.history.record_action(action.display.clone());
        self.state = next;
        self.done = outcome.done;
        let obs = self.observe();
        self.history.push_observation(obs);
        outcome
    }

    /// Index of the action the oracle bot would take now.
    pub fn bot_action(&self) -> Result<usize, BotError> {
        let effect = oracle_bot_action(&self.state, &self.task, self.config.flip_turns)?;
        // effects outside a restricted space fall back to the first action
        Ok(crate::env::index_of_effect(&self.actions, effect).unwrap_or(0))
    }

    pub fn actions(&self) -> &[TextAction] {
        &self.actions
    }

    pub fn action_displays(&self) -> Vec<String> {
        self.actions.iter().map(|a| a.display.clone()).collect()
    }

    pub fn state(&self) -> &GridState {
        &self.state
    }

    pub fn task(&self) -> &TaskSpec {
        &self.task
    }

    pub fn goal(&self) -> &str {
        &self.goal
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn is_done(&self) -> bool {
        self.done
    }

    pub fn config(&self) -> &EpisodeConfig {
        &self.config
    }

    pub fn lexicon(&self) -> &Lexicon {
        &self.lexicon
    }

    pub fn rules(&self) -> &StepRules {
        &self.rules
    }
}
