//! Text rendering of observations and goals, plus the lexicon substitution
//! tables used for generalization tests.

pub mod describe;
pub mod lexicon;
pub mod substitution;
pub mod view;

pub use describe::{describe, goal_text, location_phrase, ObservationText};
pub use lexicon::{Lexicon, Templates, Words};
pub use substitution::{apply_substitutions, contains_phrase, Scope, SubstitutionError, SubstitutionTable};
pub use view::{relative_to_absolute, visible_window, ViewCell};
