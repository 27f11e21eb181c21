//! Prompt assembly from the action space, the goal and a short history.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::env::TextAction;
use crate::text::ObservationText;

pub const MAX_OBSERVATIONS: usize = 3;
pub const MAX_ACTIONS: usize = MAX_OBSERVATIONS - 1;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum PromptError {
    #[error("action list is empty")]
    NoActions,
    #[error("history holds no observation")]
    NoObservation,
}

/// Sliding window over the last three observations and the actions taken
/// between them.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct HistoryBuffer {
    observations: VecDeque<ObservationText>,
    actions: VecDeque<String>,
}

impl HistoryBuffer {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn clear(&mut self) {
        self.observations.clear();
        self.actions.clear();
    }

    /// Start a new episode from its first observation.
    pub fn reset(&mut self, first: ObservationText) {
        self.clear();
        self.observations.push_back(first);
    }

    pub fn push_observation(&mut self, obs: ObservationText) {
        self.observations.push_back(obs);
        while self.observations.len() > MAX_OBSERVATIONS {
            self.observations.pop_front();
        }
        while self.actions.len() >= self.observations.len() {
            self.actions.pop_front();
        }
    }

    /// Record the action chosen for the latest observation.
    pub fn record_action(&mut self, display: impl Into<String>) {
        if self.actions.len() + 1 > self.observations.len() {
            self.actions.pop_front();
        }
        self.actions.push_back(display.into());
    }

    pub fn observations(&self) -> impl Iterator<Item = &ObservationText> {
        self.observations.iter()
    }

    pub fn observation_count(&self) -> usize {
        self.observations.len()
    }

    pub fn latest(&self) -> Option<&ObservationText> {
        self.observations.back()
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Prompt {
    pub text: String,
    pub goal: String,
    pub step: u32,
}

pub const ACTIONS_HEADER: &str = "Possible action of the agent:";
pub const GOAL_HEADER: &str = "Goal of the agent:";

/// Render the prompt text. The last `Action k:` line is left open.
pub fn build_prompt(
    actions: &[TextAction],
    goal: &str,
    history: &HistoryBuffer,
) -> Result<String, PromptError> {
    if actions.is_empty() {
        return Err(PromptError::NoActions);
    }
    let n = history.observations.len();
    if n == 0 {
        return Err(PromptError::NoObservation);
    }
    let displays: Vec<&str> = actions.iter().map(|a| a.display.as_str()).collect();
    let mut lines = Vec::with_capacity(2 + 2 * n);
    lines.push(format!("{ACTIONS_HEADER} {}", displays.join(", ")));
    lines.push(format!("{GOAL_HEADER} {goal}"));
    // past actions aligned with all but the current observation
    let past = history.actions.iter().skip(history.actions.len().saturating_sub(n - 1));
    let mut past = past.map(String::as_str);
    for (k, obs) in history.observations.iter().enumerate() {
        lines.push(format!("Obs. {k}: {}", obs.joined(", ")));
        if k + 1 < n {
            lines.push(format!("Action {k}: {}", past.next().unwrap_or("")));
        } else {
            lines.push(format!("Action {k}:"));
        }
    }
    Ok(lines.join("\n"))
}

/// [`build_prompt`] with metadata.
pub fn make_prompt(
    actions: &[TextAction],
    goal: &str,
    history: &HistoryBuffer,
    step: u32,
) -> Result<Prompt, PromptError> {
    Ok(Prompt {
        text: build_prompt(actions, goal, history)?,
        goal: goal.to_string(),
        step,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::{english_actions, ActionSpaceKind};

    fn obs(s: &str) -> ObservationText {
        ObservationText {
            lines: s.split(" | ").map(str::to_string).collect(),
        }
    }

    #[test]
    fn first_step_prompt() {
        let mut h = HistoryBuffer::new();
        h.reset(obs("You see a wall 2 steps forward | You see a red ball 1 step left"));
        let p = build_prompt(&english_actions(ActionSpaceKind::Restricted), "go to the red ball", &h).unwrap();
        assert_eq!(
            p,
            "Possible action of the agent: turn left, turn right, go forward\n\
             Goal of the agent: go to the red ball\n\
             Obs. 0: You see a wall 2 steps forward, You see a red ball 1 step left\n\
             Action 0:"
        );
    }

    #[test]
    fn window_keeps_three_observations_and_two_actions() {
        let mut h = HistoryBuffer::new();
        h.reset(obs("o0"));
        for i in 1..6 {
            h.record_action(format!("a{}", i - 1));
            h.push_observation(obs(&format!("o{i}")));
        }
        let p = build_prompt(&english_actions(ActionSpaceKind::Restricted), "g", &h).unwrap();
        let lines: Vec<&str> = p.lines().collect();
        assert_eq!(
            &lines[2..],
            ["Obs. 0: o3", "Action 0: a3", "Obs. 1: o4", "Action 1: a4", "Obs. 2: o5", "Action 2:"]
        );
    }

    #[test]
    fn empty_inputs_are_errors() {
        let mut h = HistoryBuffer::new();
        assert_eq!(
            build_prompt(&english_actions(ActionSpaceKind::Canonical), "g", &h),
            Err(PromptError::NoObservation)
        );
        h.reset(obs("o"));
        assert_eq!(build_prompt(&[], "g", &h), Err(PromptError::NoActions));
    }
}
