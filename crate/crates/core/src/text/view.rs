use crate::env::{DoorState, GridState, ObjectKind, Position};

/// Forward offsets seen by the agent (its own row is 0).
pub const FORWARD_RANGE: std::ops::RangeInclusive<i32> = 0..=5;
/// Lateral offsets seen by the agent; negative is left.
pub const LATERAL_RANGE: std::ops::RangeInclusive<i32> = -3..=2;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ViewCell {
    pub pos: Position,
    pub forward: i32,
    pub lateral: i32,
}

/// Absolute cell at `forward` steps ahead and `lateral` steps to the right
/// (negative: left) of the agent.
pub fn relative_to_absolute(state: &GridState, forward: i32, lateral: i32) -> Position {
    let (fx, fy) = state.agent_dir.delta();
    let (rx, ry) = state.agent_dir.right().delta();
    state
        .agent_pos
        .offset(forward * fx + lateral * rx, forward * fy + lateral * ry)
}

fn blocks_sight(state: &GridState, pos: Position) -> bool {
    state.object_at(pos).is_some_and(|o| {
        o.kind == ObjectKind::Door
            && matches!(o.door_state, Some(DoorState::Closed) | Some(DoorState::Locked))
    })
}

/// The 6x6 patch in front of the agent, clipped to the room. Cells lying
/// behind a closed door along the same row or column of sight are removed.
pub fn visible_window(state: &GridState) -> Vec<ViewCell> {
    let mut cells = Vec::with_capacity(36);
    for forward in FORWARD_RANGE {
        for lateral in LATERAL_RANGE {
            let pos = relative_to_absolute(state, forward, lateral);
            if !state.in_bounds(pos) {
                continue;
            }
            let column_blocked = (0..forward)
                .any(|f| blocks_sight(state, relative_to_absolute(state, f, lateral)));
            let row_blocked = (1..lateral.abs())
                .any(|l| blocks_sight(state, relative_to_absolute(state, forward, l * lateral.signum())));
            if column_blocked || row_blocked {
                continue;
            }
            cells.push(ViewCell {
                pos,
                forward,
                lateral,
            });
        }
    }
    cells
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::{Direction, ProgressFlags, WorldObject};

    fn state_at(pos: Position, dir: Direction) -> GridState {
        GridState {
            room_size: 8,
            objects: vec![],
            agent_pos: pos,
            agent_dir: dir,
            carried: None,
            step_count: 0,
            rng_seed: 0,
            progress: ProgressFlags::default(),
        }
    }

    #[test]
    fn window_is_forward_only_and_at_most_36_cells() {
        let s = state_at(Position::new(4, 4), Direction::North);
        let w = visible_window(&s);
        assert!(w.len() <= 36);
        assert!(w.iter().all(|c| c.forward >= 0));
        // behind the agent (f = -1) never appears
        let behind = relative_to_absolute(&s, -1, 0);
        assert!(w.iter().all(|c| c.pos != behind));
        // the faced cell is there
        assert!(w.iter().any(|c| c.forward == 1 && c.lateral == 0 && c.pos == s.front_pos()));
    }

    #[test]
    fn offsets_follow_heading() {
        let s = state_at(Position::new(3, 3), Direction::East);
        assert_eq!(relative_to_absolute(&s, 1, 0), Position::new(4, 3));
        assert_eq!(relative_to_absolute(&s, 0, -1), Position::new(3, 2));
        assert_eq!(relative_to_absolute(&s, 0, 1), Position::new(3, 4));
    }

    #[test]
    fn closed_door_occludes_cells_behind_it() {
        let mut s = GridState {
            room_size: 10,
            ..state_at(Position::new(4, 8), Direction::North)
        };
        s.objects.push(WorldObject::door(
            crate::env::Color::Red,
            Position::new(4, 6),
            DoorState::Closed,
        ));
        let w = visible_window(&s);
        assert!(w.iter().any(|c| c.pos == Position::new(4, 6)));
        assert!(!w.iter().any(|c| c.pos == Position::new(4, 5)));
        s.objects[0].door_state = Some(DoorState::Open);
        assert!(visible_window(&s).iter().any(|c| c.pos == Position::new(4, 5)));
    }
}
