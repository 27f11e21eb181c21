use serde::{Deserialize, Serialize};

use super::lexicon::{resolve_indefinite, Lexicon};
use super::view::{visible_window, ViewCell};
use crate::env::{Article, DoorState, GridState, ObjectKind, TaskSpec};

/// The description lines of one observation, in emission order.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ObservationText {
    pub lines: Vec<String>,
}

impl ObservationText {
    pub fn joined(&self, sep: &str) -> String {
        self.lines.join(sep)
    }
}

impl std::fmt::Display for ObservationText {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.joined(", "))
    }
}

fn count_phrase(n: i32, direction: &str, lex: &Lexicon) -> String {
    let unit = if n == 1 { &lex.words.step } else { &lex.words.steps };
    format!("{n} {unit} {direction}")
}

/// "2 steps left and 1 step forward"; zero components are left out.
pub fn location_phrase(forward: i32, lateral: i32, lex: &Lexicon) -> String {
    let mut parts = Vec::with_capacity(2);
    if lateral < 0 {
        parts.push(count_phrase(-lateral, &lex.words.left, lex));
    } else if lateral > 0 {
        parts.push(count_phrase(lateral, &lex.words.right, lex));
    }
    if forward > 0 {
        parts.push(count_phrase(forward, &lex.words.forward, lex));
    }
    parts.join(&format!(" {} ", lex.words.and))
}

fn fill(template: &str, pairs: &[(&str, &str)], lex: &Lexicon) -> String {
    let mut s = template.to_string();
    for (key, value) in pairs {
        s = s.replace(key, value);
    }
    resolve_indefinite(&s, &lex.words)
}

const SIDES: usize = 4;

fn wall_side(state: &GridState, cell: &ViewCell) -> [bool; SIDES] {
    let n = state.room_size as i32 - 1;
    let p = cell.pos;
    [p.y == 0, p.x == n, p.y == n, p.x == 0]
}

/// Render what the agent sees. Objects and walls are ordered by
/// (forward, lateral); the carried object comes last.
pub fn describe(state: &GridState, lex: &Lexicon) -> ObservationText {
    let window = visible_window(state);
    let mut entries: Vec<((i32, i32), String)> = Vec::new();

    let mut nearest_wall: [Option<ViewCell>; SIDES] = [None; SIDES];
    for cell in &window {
        if !state.is_wall(cell.pos) {
            continue;
        }
        let key = |c: &ViewCell| (c.lateral.abs() + c.forward, c.forward, c.lateral);
        for (side, on) in wall_side(state, cell).into_iter().enumerate() {
            if on && nearest_wall[side].map_or(true, |best| key(cell) < key(&best)) {
                nearest_wall[side] = Some(*cell);
            }
        }
    }
    let mut wall_cells: Vec<ViewCell> = nearest_wall.into_iter().flatten().collect();
    wall_cells.sort();
    wall_cells.dedup();
    for cell in wall_cells {
        let line = fill(
            &lex.templates.see_object,
            &[
                ("{object}", &lex.words.wall),
                ("{location}", &location_phrase(cell.forward, cell.lateral, lex)),
            ],
            lex,
        );
        entries.push(((cell.forward, cell.lateral), line));
    }

    for cell in &window {
        if cell.forward == 0 && cell.lateral == 0 {
            continue;
        }
        let Some(obj) = state.object_at(cell.pos) else {
            continue;
        };
        let location = location_phrase(cell.forward, cell.lateral, lex);
        let object = lex.object_phrase(obj.desc());
        let line = if obj.kind == ObjectKind::Door {
            let door_state = match obj.door_state {
                Some(DoorState::Open) => &lex.words.open,
                Some(DoorState::Locked) => &lex.words.locked,
                _ => &lex.words.closed,
            };
            fill(
                &lex.templates.see_door,
                &[
                    ("{state}", door_state),
                    ("{object}", &object),
                    ("{location}", &location),
                ],
                lex,
            )
        } else {
            fill(
                &lex.templates.see_object,
                &[("{object}", &object), ("{location}", &location)],
                lex,
            )
        };
        entries.push(((cell.forward, cell.lateral), line));
    }

    entries.sort_by_key(|(k, _)| *k);
    let mut lines: Vec<String> = entries.into_iter().map(|(_, l)| l).collect();
    if let Some(desc) = state.carried {
        lines.push(fill(
            &lex.templates.carry,
            &[("{object}", &lex.object_phrase(desc))],
            lex,
        ));
    }
    ObservationText { lines }
}

fn article_word(article: Article, lex: &Lexicon) -> &str {
    match article {
        Article::A => "{a_n}",
        Article::The => &lex.words.article_the,
    }
}

/// The instruction string of a task.
pub fn goal_text(task: &TaskSpec, lex: &Lexicon) -> String {
    let template = lex
        .templates
        .goals
        .get(&task.family)
        .cloned()
        .unwrap_or_else(|| Lexicon::english().templates.goals[&task.family].clone());
    let object_a = lex.object_phrase(task.target_a);
    let mut pairs: Vec<(&str, String)> = vec![
        ("{article}", article_word(task.article_a, lex).to_string()),
        ("{object}", object_a),
    ];
    if let (Some(b), Some(art)) = (task.target_b, task.article_b) {
        pairs.insert(0, ("{object_b}", lex.object_phrase(b)));
        pairs.insert(0, ("{article_b}", article_word(art, lex).to_string()));
    }
    let borrowed: Vec<(&str, &str)> = pairs.iter().map(|(k, v)| (*k, v.as_str())).collect();
    fill(&template, &borrowed, lex)
}
