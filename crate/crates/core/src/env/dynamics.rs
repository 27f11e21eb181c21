use serde::{Deserialize, Serialize};

use super::action::{Effect, TextAction};
use super::task::{first_subgoal_holds, task_success, TaskSpec};
use super::types::{DoorState, GridState, ObjectKind, WorldObject};

/// Training rewards are the BabyAI reward scaled by this factor.
pub const REWARD_SCALE: f64 = 20.0;

/// Per-episode rules for [`step`].
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepRules {
    /// Horizon `H`.
    pub max_steps: u32,
    /// Swap the rotation of the two turn effects.
    pub flip_turns: bool,
    /// Count `N` from 0 (first step is N = 0) instead of 1.
    pub reward_from_zero: bool,
}

impl StepRules {
    pub fn new(max_steps: u32) -> Self {
        Self {
            max_steps,
            flip_turns: false,
            reward_from_zero: false,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepOutcome {
    pub reward: f64,
    pub done: bool,
    pub success: bool,
    pub steps_used: u32,
}

/// `20 * (1 - 0.9 * n / h)`.
pub fn success_reward(n: u32, h: u32) -> f64 {
    REWARD_SCALE * (1.0 - 0.9 * f64::from(n) / f64::from(h))
}

/// Apply one action. Impossible actions (walking into a wall, picking up
/// from an empty cell, ...) leave the world unchanged but still consume a
/// step.
pub fn step(
    state: &GridState,
    task: &TaskSpec,
    action: &TextAction,
    rules: &StepRules,
) -> (GridState, StepOutcome) {
    let mut next = state.clone();
    next.progress.last_drop = None;
    apply_effect(&mut next, action.effect, rules.flip_turns);
    next.step_count += 1;

    if next.progress.first_done_at.is_none() && first_subgoal_holds(&next, task) {
        next.progress.first_done_at = Some(next.step_count);
    }

    let success = task_success(&next, task);
    let reward = if success {
        let n = if rules.reward_from_zero {
            next.step_count - 1
        } else {
            next.step_count
        };
        success_reward(n, rules.max_steps)
    } else {
        0.0
    };
    let done = success || next.step_count >= rules.max_steps;
    let outcome = StepOutcome {
        reward,
        done,
        success,
        steps_used: next.step_count,
    };
    (next, outcome)
}

fn apply_effect(state: &mut GridState, effect: Effect, flip_turns: bool) {
    let effect = match (effect, flip_turns) {
        (Effect::TurnLeft, true) => Effect::TurnRight,
        (Effect::TurnRight, true) => Effect::TurnLeft,
        (e, _) => e,
    };
    let front = state.front_pos();
    match effect {
        Effect::TurnLeft => state.agent_dir = state.agent_dir.left(),
        Effect::TurnRight => state.agent_dir = state.agent_dir.right(),
        Effect::GoForward => {
            if state.is_passable(front) {
                state.agent_pos = front;
            }
        }
        Effect::PickUp => {
            if state.carried.is_none() {
                if let Some(idx) = state.object_index_at(front) {
                    if state.objects[idx].kind.is_movable() {
                        let obj = state.objects.remove(idx);
                        state.carried = Some(obj.desc());
                    }
                }
            }
        }
        Effect::Drop => {
            if let Some(desc) = state.carried {
                if state.is_interior(front) && state.object_at(front).is_none() {
                    state.objects.push(WorldObject::movable(desc, front));
                    state.carried = None;
                    state.progress.last_drop = Some(front);
                }
            }
        }
        Effect::Toggle => {
            let carried = state.carried;
            if let Some(idx) = state.object_index_at(front) {
                let door = &mut state.objects[idx];
                if door.kind == ObjectKind::Door {
                    door.door_state = match door.door_state {
                        Some(DoorState::Locked) => {
                            let has_key = carried
                                .is_some_and(|c| c.kind == ObjectKind::Key && c.color == door.color);
                            if has_key {
                                Some(DoorState::Open)
                            } else {
                                Some(DoorState::Locked)
                            }
                        }
                        Some(DoorState::Closed) => Some(DoorState::Open),
                        Some(DoorState::Open) => Some(DoorState::Closed),
                        None => None,
                    };
                }
            }
        }
        Effect::Noop => {}
    }
}
