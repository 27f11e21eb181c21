use serde::{Deserialize, Serialize};

/// What an action does to the world, independent of how it is worded.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Effect {
    TurnLeft,
    TurnRight,
    GoForward,
    PickUp,
    Drop,
    Toggle,
    Noop,
}

/// Identity of an action slot in an action space. Several slots may share an
/// effect (the three no-op commands of the augmented space).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ActionId {
    TurnLeft,
    TurnRight,
    GoForward,
    PickUp,
    Drop,
    Toggle,
    Sleep,
    DoNothing,
    Think,
}

impl ActionId {
    pub const ALL: [ActionId; 9] = [
        ActionId::TurnLeft,
        ActionId::TurnRight,
        ActionId::GoForward,
        ActionId::PickUp,
        ActionId::Drop,
        ActionId::Toggle,
        ActionId::Sleep,
        ActionId::DoNothing,
        ActionId::Think,
    ];

    pub fn effect(self) -> Effect {
        match self {
            ActionId::TurnLeft => Effect::TurnLeft,
            ActionId::TurnRight => Effect::TurnRight,
            ActionId::GoForward => Effect::GoForward,
            ActionId::PickUp => Effect::PickUp,
            ActionId::Drop => Effect::Drop,
            ActionId::Toggle => Effect::Toggle,
            ActionId::Sleep | ActionId::DoNothing | ActionId::Think => Effect::Noop,
        }
    }

    pub fn english(self) -> &'static str {
        match self {
            ActionId::TurnLeft => "turn left",
            ActionId::TurnRight => "turn right",
            ActionId::GoForward => "go forward",
            ActionId::PickUp => "pick up",
            ActionId::Drop => "drop",
            ActionId::Toggle => "toggle",
            ActionId::Sleep => "sleep",
            ActionId::DoNothing => "do nothing",
            ActionId::Think => "think",
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ActionSpaceKind {
    /// turn left, turn right, go forward
    Restricted,
    /// the six primitive commands
    #[default]
    Canonical,
    /// canonical plus three commands with no effect
    Augmented,
}

impl ActionSpaceKind {
    pub fn ids(self) -> &'static [ActionId] {
        match self {
            ActionSpaceKind::Restricted => &ActionId::ALL[..3],
            ActionSpaceKind::Canonical => &ActionId::ALL[..6],
            ActionSpaceKind::Augmented => &ActionId::ALL[..],
        }
    }

    pub fn len(self) -> usize {
        self.ids().len()
    }

    pub fn is_empty(self) -> bool {
        false
    }
}

/// A command as the agent sees it (`display`) and as the world applies it
/// (`effect`).
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TextAction {
    pub display: String,
    pub effect: Effect,
}

impl TextAction {
    pub fn new(display: impl Into<String>, effect: Effect) -> Self {
        Self {
            display: display.into(),
            effect,
        }
    }
}

/// English action list for an action space.
pub fn english_actions(kind: ActionSpaceKind) -> Vec<TextAction> {
    kind.ids()
        .iter()
        .map(|id| TextAction::new(id.english(), id.effect()))
        .collect()
}

/// Index of the first action in `actions` with the given effect.
pub fn index_of_effect(actions: &[TextAction], effect: Effect) -> Option<usize> {
    actions.iter().position(|a| a.effect == effect)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::BTreeSet;

    #[test]
    fn action_spaces_nest_as_effect_sets() {
        let effects = |k: ActionSpaceKind| -> BTreeSet<Effect> {
            k.ids().iter().map(|a| a.effect()).collect()
        };
        let r = effects(ActionSpaceKind::Restricted);
        let c = effects(ActionSpaceKind::Canonical);
        let a = effects(ActionSpaceKind::Augmented);
        assert!(r.is_subset(&c) && c.is_subset(&a));
        assert_eq!(ActionSpaceKind::Restricted.len(), 3);
        assert_eq!(ActionSpaceKind::Canonical.len(), 6);
        assert_eq!(ActionSpaceKind::Augmented.len(), 9);
        let extra: Vec<_> = ActionSpaceKind::Augmented.ids()[6..].iter().map(|a| a.effect()).collect();
        assert_eq!(extra, vec![Effect::Noop; 3]);
    }
}
