//! Single-room gridworld: state, dynamics, tasks, procedural generation and
//! the oracle planner.

pub mod action;
pub mod bot;
pub mod dynamics;
pub mod generate;
pub mod seed;
pub mod task;
pub mod trace;
pub mod types;

pub use action::{english_actions, index_of_effect, ActionId, ActionSpaceKind, Effect, TextAction};
pub use bot::{oracle_bot_action, BotError};
pub use dynamics::{step, success_reward, StepOutcome, StepRules, REWARD_SCALE};
pub use generate::{generate_episode, EpisodeConfig, GenerationError, TargetFilter};
pub use seed::derive_seed;
pub use task::{task_success, Article, TaskFamily, TaskSpec};
pub use trace::{read_trace, render_ascii, TraceHeader, TraceRecord, TraceWriter};
pub use types::{
    Color, Direction, DoorState, GridState, ObjectDesc, ObjectKind, Position, ProgressFlags,
    WorldObject,
};
