use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::action::{ActionSpaceKind, TextAction};
use super::bot::oracle_bot_action;
use super::dynamics::{step, StepRules};
use super::task::{task_success, Article, TaskFamily, TaskSpec};
use super::types::{
    Color, Direction, DoorState, GridState, ObjectDesc, ObjectKind, Position, ProgressFlags,
    WorldObject,
};

const MAX_ATTEMPTS: usize = 200;

#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum GenerationError {
    #[error("no task family requested")]
    NoFamilies,
    #[error("room too small: {needed} cells needed, {available} interior cells available")]
    RoomTooSmall { needed: usize, available: usize },
    #[error("no eligible goal object for {0:?} under the target filter")]
    NoEligibleTarget(TaskFamily),
    #[error("could not generate a solvable episode after {0} attempts")]
    Exhausted(usize),
}

/// Restricts which objects goals may refer to.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TargetFilter {
    /// When set, goals only refer to these objects.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub allowed: Option<Vec<ObjectDesc>>,
    /// Goals never refer to these objects (they may still be distractors).
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub excluded: Vec<ObjectDesc>,
}

impl TargetFilter {
    pub fn allows(&self, desc: ObjectDesc) -> bool {
        !self.excluded.contains(&desc)
            && self.allowed.as_ref().map_or(true, |a| a.contains(&desc))
    }

    /// Objects held out of training goals for the unseen-objects test.
    pub fn unseen_objects() -> Vec<ObjectDesc> {
        vec![
            ObjectDesc::new(ObjectKind::Box, Color::Yellow),
            ObjectDesc::new(ObjectKind::Key, Color::Red),
            ObjectDesc::new(ObjectKind::Door, Color::Red),
            ObjectDesc::new(ObjectKind::Ball, Color::Green),
            ObjectDesc::new(ObjectKind::Door, Color::Grey),
        ]
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EpisodeConfig {
    pub room_size: usize,
    pub num_distractors: usize,
    /// Default horizon `H`.
    pub max_steps: u32,
    /// Per-family horizon overrides.
    pub max_steps_per_family: BTreeMap<TaskFamily, u32>,
    pub action_space: ActionSpaceKind,
    pub flip_turns: bool,
    pub reward_from_zero: bool,
    pub seed: u64,
    pub task_families: Vec<TaskFamily>,
    pub targets: TargetFilter,
}

impl Default for EpisodeConfig {
    fn default() -> Self {
        Self {
            room_size: 8,
            num_distractors: 8,
            max_steps: 64,
            max_steps_per_family: default_long_horizons(),
            action_space: ActionSpaceKind::Canonical,
            flip_turns: false,
            reward_from_zero: false,
            seed: 0,
            task_families: vec![TaskFamily::GoTo],
            targets: TargetFilter::default(),
        }
    }
}

impl EpisodeConfig {
    pub fn go_to() -> Self {
        Self::default()
    }

    pub fn training_mix() -> Self {
        Self {
            task_families: TaskFamily::TRAINING_MIX.to_vec(),
            ..Self::default()
        }
    }

    pub fn with_seed(&self, seed: u64) -> Self {
        Self {
            seed,
            ..self.clone()
        }
    }

    pub fn horizon(&self, family: TaskFamily) -> u32 {
        self.max_steps_per_family
            .get(&family)
            .copied()
            .unwrap_or(self.max_steps)
    }

    pub fn rules(&self, family: TaskFamily) -> StepRules {
        StepRules {
            max_steps: self.horizon(family),
            flip_turns: self.flip_turns,
            reward_from_zero: self.reward_from_zero,
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        if self.room_size < 4 {
            return Err(format!("room_size must be at least 4, got {}", self.room_size));
        }
        if self.max_steps == 0 || self.max_steps_per_family.values().any(|&h| h == 0) {
            return Err("max_steps must be positive".into());
        }
        if self.task_families.is_empty() {
            return Err("task_families must not be empty".into());
        }
        Ok(())
    }

    pub fn generate(&self) -> Result<(GridState, TaskSpec), GenerationError> {
        generate_episode(self, &self.task_families)
    }
}

/// Procedurally generate a solvable single-room episode.
///
/// The same `config.seed` always produces the same episode. Every episode is
/// checked by replaying the oracle bot within the horizon before being
/// returned.
pub fn generate_episode(
    config: &EpisodeConfig,
    families: &[TaskFamily],
) -> Result<(GridState, TaskSpec), GenerationError> {
    if families.is_empty() {
        return Err(GenerationError::NoFamilies);
    }
    let interior = interior_cells(config.room_size);
    let max_objects = families
        .iter()
        .map(|f| usize::from(f.is_two_object() || *f == TaskFamily::Unlock) + 1)
        .max()
        .unwrap_or(1);
    let needed = max_objects + config.num_distractors + 1;
    if needed > interior.len() {
        return Err(GenerationError::RoomTooSmall {
            needed,
            available: interior.len(),
        });
    }

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    for _ in 0..MAX_ATTEMPTS {
        let family = *families.choose(&mut rng).expect("non-empty");
        let Some((state, task)) = try_generate(config, family, &interior, &mut rng)? else {
            continue;
        };
        if task_success(&state, &task) {
            continue;
        }
        if bot_solves(&state, &task, &config.rules(family)) {
            return Ok((state, task));
        }
    }
    Err(GenerationError::Exhausted(MAX_ATTEMPTS))
}

/// Two-object tasks and Unlock get twice the default horizon.
pub fn default_long_horizons() -> BTreeMap<TaskFamily, u32> {
    TaskFamily::ALL
        .into_iter()
        .filter(|f| f.is_two_object() || *f == TaskFamily::Unlock)
        .map(|f| (f, 128))
        .collect()
}

fn interior_cells(room_size: usize) -> Vec<Position> {
    let n = room_size as i32;
    let mut cells = Vec::new();
    for y in 1..n - 1 {
        for x in 1..n - 1 {
            cells.push(Position::new(x, y));
        }
    }
    cells
}

fn eligible_movable(filter: &TargetFilter) -> Vec<ObjectDesc> {
    ObjectKind::MOVABLE
        .iter()
        .flat_map(|&k| Color::ALL.iter().map(move |&c| ObjectDesc::new(k, c)))
        .filter(|d| filter.allows(*d))
        .collect()
}

fn try_generate(
    config: &EpisodeConfig,
    family: TaskFamily,
    interior: &[Position],
    rng: &mut ChaCha8Rng,
) -> Result<Option<(GridState, TaskSpec)>, GenerationError> {
    let mut free: Vec<Position> = interior.to_vec();
    free.shuffle(rng);
    let mut objects = Vec::new();
    let mut place = |desc: ObjectDesc, objects: &mut Vec<WorldObject>| {
        let pos = free.pop().expect("capacity checked");
        objects.push(WorldObject::movable(desc, pos));
    };

    let (target_a, target_b) = match family {
        TaskFamily::Unlock => {
            let colors: Vec<Color> = Color::ALL
                .into_iter()
                .filter(|&c| config.targets.allows(ObjectDesc::new(ObjectKind::Door, c)))
                .collect();
            let color = *colors
                .choose(rng)
                .ok_or(GenerationError::NoEligibleTarget(family))?;
            let door_pos = random_wall_cell(config.room_size, rng);
            objects.push(WorldObject::door(color, door_pos, DoorState::Locked));
            place(ObjectDesc::new(ObjectKind::Key, color), &mut objects);
            (ObjectDesc::new(ObjectKind::Door, color), None)
        }
        f if f.is_two_object() => {
            let eligible = eligible_movable(&config.targets);
            let a = *eligible
                .choose(rng)
                .ok_or(GenerationError::NoEligibleTarget(family))?;
            let rest: Vec<ObjectDesc> = eligible.into_iter().filter(|&d| d != a).collect();
            let b = *rest
                .choose(rng)
                .ok_or(GenerationError::NoEligibleTarget(family))?;
            place(a, &mut objects);
            place(b, &mut objects);
            (a, Some(b))
        }
        _ => {
            let eligible = eligible_movable(&config.targets);
            let a = *eligible
                .choose(rng)
                .ok_or(GenerationError::NoEligibleTarget(family))?;
            place(a, &mut objects);
            (a, None)
        }
    };

    for _ in 0..config.num_distractors {
        let kind = *ObjectKind::MOVABLE.choose(rng).expect("non-empty");
        let color = *Color::ALL.choose(rng).expect("non-empty");
        place(ObjectDesc::new(kind, color), &mut objects);
    }

    let agent_pos = free.pop().expect("capacity checked");
    let agent_dir = Direction::ALL[rng.gen_range(0..4)];
    let state = GridState {
        room_size: config.room_size,
        objects,
        agent_pos,
        agent_dir,
        carried: None,
        step_count: 0,
        rng_seed: config.seed,
        progress: ProgressFlags {
            door_started_locked: family == TaskFamily::Unlock,
            ..ProgressFlags::default()
        },
    };

    let article = |d: ObjectDesc| {
        if state.count_matching(d) == 1 {
            Article::The
        } else {
            Article::A
        }
    };
    let task = match target_b {
        Some(b) => TaskSpec::pair(family, (target_a, article(target_a)), (b, article(b))),
        None => TaskSpec::single(family, target_a, article(target_a)),
    };
    Ok(Some((state, task)))
}

fn random_wall_cell(room_size: usize, rng: &mut ChaCha8Rng) -> Position {
    let n = room_size as i32;
    let along = rng.gen_range(1..n - 1);
    match rng.gen_range(0..4) {
        0 => Position::new(along, 0),
        1 => Position::new(n - 1, along),
        2 => Position::new(along, n - 1),
        _ => Position::new(0, along),
    }
}

fn bot_solves(state: &GridState, task: &TaskSpec, rules: &StepRules) -> bool {
    let mut cur = state.clone();
    loop {
        let Ok(effect) = oracle_bot_action(&cur, task, rules.flip_turns) else {
            return false;
        };
        let (next, outcome) = step(&cur, task, &TextAction::new("", effect), rules);
        if outcome.success {
            return true;
        }
        if outcome.done {
            return false;
        }
        cur = next;
    }
}
