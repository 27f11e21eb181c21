use serde::{Deserialize, Serialize};

use super::types::{DoorState, GridState, ObjectDesc, ObjectKind};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TaskFamily {
    GoTo,
    PickUp,
    PutNextTo,
    PickUpThenGoTo,
    GoToAfterPickUp,
    Unlock,
    PickUpThenPickUp,
    PickUpAfterPickUp,
}

impl TaskFamily {
    pub const ALL: [TaskFamily; 8] = [
        TaskFamily::GoTo,
        TaskFamily::PickUp,
        TaskFamily::PutNextTo,
        TaskFamily::PickUpThenGoTo,
        TaskFamily::GoToAfterPickUp,
        TaskFamily::Unlock,
        TaskFamily::PickUpThenPickUp,
        TaskFamily::PickUpAfterPickUp,
    ];

    /// The multi-task training mix.
    pub const TRAINING_MIX: [TaskFamily; 6] = [
        TaskFamily::GoTo,
        TaskFamily::PickUp,
        TaskFamily::PutNextTo,
        TaskFamily::PickUpThenGoTo,
        TaskFamily::GoToAfterPickUp,
        TaskFamily::Unlock,
    ];

    /// Held-out recomposition of two seen tasks.
    pub const COMPOSE_PICKUP: [TaskFamily; 2] =
        [TaskFamily::PickUpThenPickUp, TaskFamily::PickUpAfterPickUp];

    pub fn is_two_object(self) -> bool {
        matches!(
            self,
            TaskFamily::PutNextTo
                | TaskFamily::PickUpThenGoTo
                | TaskFamily::GoToAfterPickUp
                | TaskFamily::PickUpThenPickUp
                | TaskFamily::PickUpAfterPickUp
        )
    }

    pub fn is_sequential(self) -> bool {
        matches!(
            self,
            TaskFamily::PickUpThenGoTo
                | TaskFamily::GoToAfterPickUp
                | TaskFamily::PickUpThenPickUp
                | TaskFamily::PickUpAfterPickUp
        )
    }

    pub fn name(self) -> &'static str {
        match self {
            TaskFamily::GoTo => "go_to",
            TaskFamily::PickUp => "pick_up",
            TaskFamily::PutNextTo => "put_next_to",
            TaskFamily::PickUpThenGoTo => "pick_up_then_go_to",
            TaskFamily::GoToAfterPickUp => "go_to_after_pick_up",
            TaskFamily::Unlock => "unlock",
            TaskFamily::PickUpThenPickUp => "pick_up_then_pick_up",
            TaskFamily::PickUpAfterPickUp => "pick_up_after_pick_up",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        let normalized = name.trim().to_ascii_lowercase().replace('-', "_");
        let alias = match normalized.as_str() {
            "goto" => "go_to",
            "pickup" => "pick_up",
            "putnext" | "putnextto" => "put_next_to",
            other => other,
        };
        Self::ALL.into_iter().find(|f| f.name() == alias)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Article {
    A,
    The,
}

/// A goal `g`: task family plus the object(s) it refers to.
///
/// For sequential families `target_a` is always the object whose subgoal has
/// to be completed first, whatever the word order of the instruction.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TaskSpec {
    pub family: TaskFamily,
    pub target_a: ObjectDesc,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target_b: Option<ObjectDesc>,
    pub article_a: Article,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub article_b: Option<Article>,
}

impl TaskSpec {
    pub fn single(family: TaskFamily, target: ObjectDesc, article: Article) -> Self {
        Self {
            family,
            target_a: target,
            target_b: None,
            article_a: article,
            article_b: None,
        }
    }

    pub fn pair(
        family: TaskFamily,
        a: (ObjectDesc, Article),
        b: (ObjectDesc, Article),
    ) -> Self {
        Self {
            family,
            target_a: a.0,
            target_b: Some(b.0),
            article_a: a.1,
            article_b: Some(b.1),
        }
    }

    /// Structural validity: second target iff two-object family, Unlock
    /// targets a door, other families target movable objects.
    pub fn is_valid(&self) -> bool {
        if self.family.is_two_object() != self.target_b.is_some()
            || self.target_b.is_some() != self.article_b.is_some()
        {
            return false;
        }
        match self.family {
            TaskFamily::Unlock => self.target_a.kind == ObjectKind::Door,
            _ => {
                self.target_a.kind.is_movable()
                    && self.target_b.map_or(true, |b| b.kind.is_movable())
            }
        }
    }
}

fn faces(state: &GridState, desc: ObjectDesc) -> bool {
    state.front_object().is_some_and(|o| o.matches(desc))
}

fn carries(state: &GridState, desc: ObjectDesc) -> bool {
    state.carried == Some(desc)
}

/// Whether the first subgoal of a sequential task holds in `state`.
pub fn first_subgoal_holds(state: &GridState, task: &TaskSpec) -> bool {
    task.family.is_sequential() && carries(state, task.target_a)
}

fn second_subgoal_holds(state: &GridState, task: &TaskSpec) -> bool {
    let Some(b) = task.target_b else {
        return false;
    };
    match task.family {
        TaskFamily::PickUpThenGoTo | TaskFamily::GoToAfterPickUp => faces(state, b),
        TaskFamily::PickUpThenPickUp | TaskFamily::PickUpAfterPickUp => carries(state, b),
        _ => false,
    }
}

/// Goal test, evaluated after every transition.
///
/// Uses `state.progress` for the subgoal timestamps of sequential tasks and
/// for the drop position of PutNextTo.
pub fn task_success(state: &GridState, task: &TaskSpec) -> bool {
    let progress = &state.progress;
    match task.family {
        TaskFamily::GoTo => faces(state, task.target_a),
        TaskFamily::PickUp => carries(state, task.target_a),
        TaskFamily::PutNextTo => {
            let (Some(drop), Some(b)) = (progress.last_drop, task.target_b) else {
                return false;
            };
            let dropped_matches = state
                .object_at(drop)
                .is_some_and(|o| o.matches(task.target_a));
            dropped_matches
                && drop
                    .neighbors4()
                    .iter()
                    .any(|&n| state.object_at(n).is_some_and(|o| o.matches(b)))
        }
        TaskFamily::Unlock => {
            progress.door_started_locked
                && state.objects.iter().any(|o| {
                    o.matches(task.target_a) && o.door_state == Some(DoorState::Open)
                })
        }
        TaskFamily::PickUpThenGoTo
        | TaskFamily::GoToAfterPickUp
        | TaskFamily::PickUpThenPickUp
        | TaskFamily::PickUpAfterPickUp => {
            progress
                .first_done_at
                .is_some_and(|t| t < state.step_count)
                && second_subgoal_holds(state, task)
        }
    }
}
