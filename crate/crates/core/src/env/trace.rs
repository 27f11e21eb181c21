//! Episode traces (line-delimited JSON) and an ASCII debug view.

use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use super::generate::EpisodeConfig;
use super::task::TaskSpec;
use super::types::{DoorState, GridState, ObjectKind, Position};

/// First line of a trace file: enough to regenerate the episode.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceHeader {
    pub seed: u64,
    pub config: EpisodeConfig,
    pub task: TaskSpec,
    pub goal: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub seed: u64,
    pub step: u32,
    pub action: String,
    pub reward: f64,
    pub done: bool,
    pub success: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TraceLine {
    Episode(TraceHeader),
    Step(TraceRecord),
}

pub struct TraceWriter<W: Write> {
    out: W,
}

impl<W: Write> TraceWriter<W> {
    pub fn new(out: W) -> Self {
        Self { out }
    }

    pub fn header(&mut self, header: TraceHeader) -> std::io::Result<()> {
        self.line(&TraceLine::Episode(header))
    }

    pub fn record(&mut self, record: TraceRecord) -> std::io::Result<()> {
        self.line(&TraceLine::Step(record))
    }

    fn line(&mut self, line: &TraceLine) -> std::io::Result<()> {
        serde_json::to_writer(&mut self.out, line)?;
        self.out.write_all(b"\n")?;
        self.out.flush()
    }

    pub fn into_inner(self) -> W {
        self.out
    }
}

/// Parse a trace file into episodes, each a header and its step records.
pub fn read_trace<R: BufRead>(input: R) -> std::io::Result<Vec<(TraceHeader, Vec<TraceRecord>)>> {
    let mut episodes: Vec<(TraceHeader, Vec<TraceRecord>)> = Vec::new();
    for (n, line) in input.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let parsed: TraceLine = serde_json::from_str(&line).map_err(|e| {
            std::io::Error::new(std::io::ErrorKind::InvalidData, format!("line {}: {e}", n + 1))
        })?;
        match parsed {
            TraceLine::Episode(h) => episodes.push((h, Vec::new())),
            TraceLine::Step(r) => match episodes.last_mut() {
                Some((_, steps)) => steps.push(r),
                None => {
                    return Err(std::io::Error::new(
                        std::io::ErrorKind::InvalidData,
                        "step record before any episode header",
                    ))
                }
            },
        }
    }
    Ok(episodes)
}

/// One character per cell: `#` wall, agent as `^ > v <`, `k` key, `o` ball,
/// `b` box, doors `L` locked, `D` closed, `/` open. A legend with colors
/// follows the grid.
pub fn render_ascii(state: &GridState) -> String {
    let n = state.room_size as i32;
    let mut out = String::new();
    for y in 0..n {
        for x in 0..n {
            let p = Position::new(x, y);
            let c = if p == state.agent_pos {
                state.agent_dir.glyph()
            } else if let Some(obj) = state.object_at(p) {
                match (obj.kind, obj.door_state) {
                    (ObjectKind::Key, _) => 'k',
                    (ObjectKind::Ball, _) => 'o',
                    (ObjectKind::Box, _) => 'b',
                    (ObjectKind::Door, Some(DoorState::Locked)) => 'L',
                    (ObjectKind::Door, Some(DoorState::Open)) => '/',
                    (ObjectKind::Door, _) => 'D',
                }
            } else if state.is_boundary(p) {
                '#'
            } else {
                '.'
            };
            out.push(c);
        }
        out.push('\n');
    }
    let mut legend: Vec<String> = state
        .objects
        .iter()
        .map(|o| format!("({},{}) {} {}", o.position.x, o.position.y, o.color.name(), o.kind.name()))
        .collect();
    legend.sort();
    for l in legend {
        out.push_str(&l);
        out.push('\n');
    }
    if let Some(c) = state.carried {
        out.push_str(&format!("carrying {c}\n"));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::generate::EpisodeConfig;

    #[test]
    fn render_has_one_char_per_cell() {
        let (state, _) = EpisodeConfig::go_to().with_seed(3).generate().unwrap();
        let text = render_ascii(&state);
        let grid: Vec<&str> = text.lines().take(8).collect();
        assert!(grid.iter().all(|l| l.chars().count() == 8));
        assert_eq!(grid[0], "########");
        let glyphs = grid.iter().flat_map(|l| l.chars()).filter(|c| "^>v<".contains(*c)).count();
        assert_eq!(glyphs, 1);
    }

    #[test]
    fn trace_lines_parse_back() {
        let cfg = EpisodeConfig::go_to().with_seed(11);
        let (_, task) = cfg.generate().unwrap();
        let mut w = TraceWriter::new(Vec::new());
        w.header(TraceHeader { seed: 11, config: cfg.clone(), task, goal: "go to".into() }).unwrap();
        w.record(TraceRecord { seed: 11, step: 1, action: "turn left".into(), reward: 0.0, done: false, success: false }).unwrap();
        let bytes = w.into_inner();
        let text = String::from_utf8(bytes.clone()).unwrap();
        assert!(text.lines().nth(1).unwrap().contains("\"action\":\"turn left\""));
        let eps = read_trace(&bytes[..]).unwrap();
        assert_eq!(eps.len(), 1);
        assert_eq!(eps[0].1.len(), 1);
    }
}
