use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::env::{ActionId, ActionSpaceKind, Color, ObjectDesc, ObjectKind, TaskFamily, TextAction};

/// Closed-class words used by the renderer.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Words {
    pub wall: String,
    pub step: String,
    pub steps: String,
    pub left: String,
    pub right: String,
    pub forward: String,
    pub and: String,
    pub open: String,
    pub closed: String,
    pub locked: String,
    pub article_a: String,
    pub article_an: String,
    pub article_the: String,
}

impl Words {
    pub(crate) fn fields_mut(&mut self) -> [&mut String; 13] {
        [
            &mut self.wall,
            &mut self.step,
            &mut self.steps,
            &mut self.left,
            &mut self.right,
            &mut self.forward,
            &mut self.and,
            &mut self.open,
            &mut self.closed,
            &mut self.locked,
            &mut self.article_a,
            &mut self.article_an,
            &mut self.article_the,
        ]
    }
}

/// Sentence templates. Placeholders: `{object}`, `{location}`, `{state}`,
/// `{adjective}`, `{noun}`, `{article}`, `{object_b}`, `{article_b}` and
/// `{a_n}` (indefinite article chosen from the following word).
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Templates {
    pub object: String,
    pub see_object: String,
    pub see_door: String,
    pub carry: String,
    pub goals: BTreeMap<TaskFamily, String>,
}

impl Templates {
    pub(crate) fn fields_mut(&mut self) -> impl Iterator<Item = &mut String> {
        [
            &mut self.object,
            &mut self.see_object,
            &mut self.see_door,
            &mut self.carry,
        ]
        .into_iter()
        .chain(self.goals.values_mut())
    }
}

/// Everything needed to turn world state into text.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Lexicon {
    pub language: String,
    pub nouns: BTreeMap<ObjectKind, String>,
    pub adjectives: BTreeMap<Color, String>,
    pub actions: BTreeMap<ActionId, String>,
    pub words: Words,
    pub templates: Templates,
}

impl Default for Lexicon {
    fn default() -> Self {
        Self::english()
    }
}

impl Lexicon {
    pub fn english() -> Self {
        let goals = [
            (TaskFamily::GoTo, "go to {article} {object}"),
            (TaskFamily::PickUp, "pick up {article} {object}"),
            (
                TaskFamily::PutNextTo,
                "put {article} {object} next to {article_b} {object_b}",
            ),
            (
                TaskFamily::PickUpThenGoTo,
                "pick up {article} {object} then go to {article_b} {object_b}",
            ),
            (
                TaskFamily::GoToAfterPickUp,
                "go to {article_b} {object_b} after pick up {article} {object}",
            ),
            (TaskFamily::Unlock, "unlock {article} {object}"),
            (
                TaskFamily::PickUpThenPickUp,
                "pick up {article} {object} then pick up {article_b} {object_b}",
            ),
            (
                TaskFamily::PickUpAfterPickUp,
                "pick up {article_b} {object_b} after pick up {article} {object}",
            ),
        ]
        .into_iter()
        .map(|(f, t)| (f, t.to_string()))
        .collect();

        Self {
            language: "en".into(),
            nouns: ObjectKind::ALL
                .iter()
                .map(|k| (*k, k.name().to_string()))
                .collect(),
            adjectives: Color::ALL
                .iter()
                .map(|c| (*c, c.name().to_string()))
                .collect(),
            actions: ActionId::ALL
                .iter()
                .map(|a| (*a, a.english().to_string()))
                .collect(),
            words: Words {
                wall: "wall".into(),
                step: "step".into(),
                steps: "steps".into(),
                left: "left".into(),
                right: "right".into(),
                forward: "forward".into(),
                and: "and".into(),
                open: "open".into(),
                closed: "closed".into(),
                locked: "locked".into(),
                article_a: "a".into(),
                article_an: "an".into(),
                article_the: "the".into(),
            },
            templates: Templates {
                object: "{adjective} {noun}".into(),
                see_object: "You see {a_n} {object} {location}".into(),
                see_door: "You see {a_n} {state} {object} {location}".into(),
                carry: "You carry {a_n} {object}".into(),
                goals,
            },
        }
    }

    /// Action commands of an action space rendered in this language.
    pub fn actions_for(&self, space: ActionSpaceKind) -> Vec<TextAction> {
        space
            .ids()
            .iter()
            .map(|id| TextAction::new(self.actions[id].clone(), id.effect()))
            .collect()
    }

    pub fn object_phrase(&self, desc: ObjectDesc) -> String {
        self.templates
            .object
            .replace("{adjective}", &self.adjectives[&desc.color])
            .replace("{noun}", &self.nouns[&desc.kind])
    }

    /// Every non-empty entry, for vocabulary construction and validation.
    pub fn all_strings(&self) -> Vec<String> {
        let mut out: Vec<String> = Vec::new();
        out.extend(self.nouns.values().cloned());
        out.extend(self.adjectives.values().cloned());
        out.extend(self.actions.values().cloned());
        let mut words = self.words.clone();
        out.extend(words.fields_mut().into_iter().map(|s| s.clone()));
        let mut templates = self.templates.clone();
        out.extend(templates.fields_mut().map(|s| s.clone()));
        out
    }

    pub fn validate(&self) -> Result<(), String> {
        if self.nouns.len() != ObjectKind::ALL.len()
            || self.adjectives.len() != Color::ALL.len()
            || self.actions.len() != ActionId::ALL.len()
        {
            return Err("lexicon maps must cover every kind, color and action".into());
        }
        if self.all_strings().iter().any(|s| s.trim().is_empty()) {
            return Err("lexicon entries must be non-empty".into());
        }
        Ok(())
    }
}

/// Replace `{a_n}` with "a" or "an" depending on the next word.
pub(crate) fn resolve_indefinite(text: &str, words: &Words) -> String {
    const MARK: &str = "{a_n}";
    let mut out = String::with_capacity(text.len());
    let mut rest = text;
    while let Some(i) = rest.find(MARK) {
        out.push_str(&rest[..i]);
        rest = &rest[i + MARK.len()..];
        let next = rest.trim_start().chars().next();
        let vowel = next.is_some_and(|c| "aeiouAEIOU".contains(c));
        out.push_str(if vowel { &words.article_an } else { &words.article_a });
    }
    out.push_str(rest);
    out
}
