use std::fmt;

use serde::{Deserialize, Serialize};

/// A grid cell. `x` is the column, `y` the row, both 0-based from the
/// top-left corner of the room (boundary walls included).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Position {
    pub x: i32,
    pub y: i32,
}

impl Position {
    pub const fn new(x: i32, y: i32) -> Self {
        Self { x, y }
    }

    pub fn offset(self, dx: i32, dy: i32) -> Self {
        Self::new(self.x + dx, self.y + dy)
    }

    pub fn step(self, dir: Direction) -> Self {
        let (dx, dy) = dir.delta();
        self.offset(dx, dy)
    }

    pub fn manhattan(self, other: Position) -> i32 {
        (self.x - other.x).abs() + (self.y - other.y).abs()
    }

    pub fn neighbors4(self) -> [Position; 4] {
        [
            self.offset(0, -1),
            self.offset(1, 0),
            self.offset(0, 1),
            self.offset(-1, 0),
        ]
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    North,
    East,
    South,
    West,
}

impl Direction {
    pub const ALL: [Direction; 4] = [
        Direction::North,
        Direction::East,
        Direction::South,
        Direction::West,
    ];

    /// Unit step `(dx, dy)` in grid coordinates (y grows downwards).
    pub fn delta(self) -> (i32, i32) {
        match self {
            Direction::North => (0, -1),
            Direction::East => (1, 0),
            Direction::South => (0, 1),
            Direction::West => (-1, 0),
        }
    }

    /// Clockwise rotation.
    pub fn right(self) -> Self {
        Self::ALL[(self.index() + 1) % 4]
    }

    /// Counter-clockwise rotation.
    pub fn left(self) -> Self {
        Self::ALL[(self.index() + 3) % 4]
    }

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn glyph(self) -> char {
        match self {
            Direction::North => '^',
            Direction::East => '>',
            Direction::South => 'v',
            Direction::West => '<',
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Color {
    Red,
    Green,
    Blue,
    Purple,
    Yellow,
    Grey,
}

impl Color {
    pub const ALL: [Color; 6] = [
        Color::Red,
        Color::Green,
        Color::Blue,
        Color::Purple,
        Color::Yellow,
        Color::Grey,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Color::Red => "red",
            Color::Green => "green",
            Color::Blue => "blue",
            Color::Purple => "purple",
            Color::Yellow => "yellow",
            Color::Grey => "grey",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ObjectKind {
    Key,
    Ball,
    Box,
    Door,
}

impl ObjectKind {
    pub const ALL: [ObjectKind; 4] = [
        ObjectKind::Key,
        ObjectKind::Ball,
        ObjectKind::Box,
        ObjectKind::Door,
    ];

    /// Kinds that can be carried and can appear as distractors.
    pub const MOVABLE: [ObjectKind; 3] = [ObjectKind::Key, ObjectKind::Ball, ObjectKind::Box];

    pub fn name(self) -> &'static str {
        match self {
            ObjectKind::Key => "key",
            ObjectKind::Ball => "ball",
            ObjectKind::Box => "box",
            ObjectKind::Door => "door",
        }
    }

    pub fn is_movable(self) -> bool {
        self != ObjectKind::Door
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DoorState {
    Open,
    Closed,
    Locked,
}

/// Kind and color, without a position: what a goal refers to and what the
/// agent carries.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ObjectDesc {
    pub kind: ObjectKind,
    pub color: Color,
}

impl ObjectDesc {
    pub const fn new(kind: ObjectKind, color: Color) -> Self {
        Self { kind, color }
    }
}

impl fmt::Display for ObjectDesc {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {}", self.color.name(), self.kind.name())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct WorldObject {
    pub kind: ObjectKind,
    pub color: Color,
    pub position: Position,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub door_state: Option<DoorState>,
}

impl WorldObject {
    pub fn movable(desc: ObjectDesc, position: Position) -> Self {
        debug_assert!(desc.kind.is_movable());
        Self {
            kind: desc.kind,
            color: desc.color,
            position,
            door_state: None,
        }
    }

    pub fn door(color: Color, position: Position, state: DoorState) -> Self {
        Self {
            kind: ObjectKind::Door,
            color,
            position,
            door_state: Some(state),
        }
    }

    pub fn desc(&self) -> ObjectDesc {
        ObjectDesc::new(self.kind, self.color)
    }

    pub fn matches(&self, desc: ObjectDesc) -> bool {
        self.kind == desc.kind && self.color == desc.color
    }

    pub fn is_open_door(&self) -> bool {
        self.door_state == Some(DoorState::Open)
    }
}

/// Subgoal bookkeeping carried along with the world state.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ProgressFlags {
    /// Step index at which the first subgoal of a sequential task was first met.
    pub first_done_at: Option<u32>,
    /// Set at generation time for Unlock episodes.
    pub door_started_locked: bool,
    /// Cell where an object was dropped during the most recent step.
    pub last_drop: Option<Position>,
}

/// Full world state of a single-room episode.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct GridState {
    /// Tiles per side, boundary walls included.
    pub room_size: usize,
    pub objects: Vec<WorldObject>,
    pub agent_pos: Position,
    pub agent_dir: Direction,
    pub carried: Option<ObjectDesc>,
    pub step_count: u32,
    pub rng_seed: u64,
    #[serde(default)]
    pub progress: ProgressFlags,
}

impl GridState {
    pub fn in_bounds(&self, pos: Position) -> bool {
        let n = self.room_size as i32;
        pos.x >= 0 && pos.y >= 0 && pos.x < n && pos.y < n
    }

    /// Boundary cells form the room walls.
    pub fn is_boundary(&self, pos: Position) -> bool {
        let n = self.room_size as i32 - 1;
        self.in_bounds(pos) && (pos.x == 0 || pos.y == 0 || pos.x == n || pos.y == n)
    }

    pub fn is_interior(&self, pos: Position) -> bool {
        self.in_bounds(pos) && !self.is_boundary(pos)
    }

    pub fn object_at(&self, pos: Position) -> Option<&WorldObject> {
        self.objects.iter().find(|o| o.position == pos)
    }

    pub fn object_index_at(&self, pos: Position) -> Option<usize> {
        self.objects.iter().position(|o| o.position == pos)
    }

    /// A wall cell without a door in it.
    pub fn is_wall(&self, pos: Position) -> bool {
        self.is_boundary(pos)
            && !self
                .object_at(pos)
                .is_some_and(|o| o.kind == ObjectKind::Door)
    }

    pub fn front_pos(&self) -> Position {
        self.agent_pos.step(self.agent_dir)
    }

    pub fn front_object(&self) -> Option<&WorldObject> {
        self.object_at(self.front_pos())
    }

    /// Whether the agent may stand on `pos`.
    pub fn is_passable(&self, pos: Position) -> bool {
        if !self.in_bounds(pos) {
            return false;
        }
        match self.object_at(pos) {
            Some(obj) => obj.is_open_door(),
            None => !self.is_boundary(pos),
        }
    }

    /// Interior cell with no object and no agent.
    pub fn is_free_interior(&self, pos: Position) -> bool {
        self.is_interior(pos) && self.object_at(pos).is_none() && pos != self.agent_pos
    }

    pub fn count_matching(&self, desc: ObjectDesc) -> usize {
        self.objects.iter().filter(|o| o.matches(desc)).count()
    }

    /// Objects on the grid plus the carried one.
    pub fn movable_object_count(&self) -> usize {
        self.objects.iter().filter(|o| o.kind.is_movable()).count() + usize::from(self.carried.is_some())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rotations_cycle_with_period_four() {
        for d in Direction::ALL {
            assert_eq!(d.right().right().right().right(), d);
            assert_eq!(d.left().right(), d);
            assert_eq!(d.left().left().left().left(), d);
        }
        assert_eq!(Direction::North.right(), Direction::East);
        assert_eq!(Direction::North.left(), Direction::West);
    }

    #[test]
    fn vocabulary_sizes() {
        assert_eq!(Color::ALL.len(), 6);
        assert_eq!(ObjectKind::ALL.len(), 4);
    }
}
