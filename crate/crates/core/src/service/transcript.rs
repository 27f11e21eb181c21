//! Recorded request/response exchanges, one JSON object per line.

use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use super::protocol::{Frame, Request};
use super::worker::InProcessWorker;
use super::ServiceError;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TranscriptEntry {
    pub request: Frame,
    pub response: Frame,
}

/// Send `requests` to `worker` in order, numbering them from 1.
pub fn record_transcript(worker: &InProcessWorker, requests: &[Request]) -> Vec<TranscriptEntry> {
    requests
        .iter()
        .enumerate()
        .map(|(i, r)| {
            let request = r.to_frame(i as u64 + 1);
            let response = worker.handle_frame(request.clone());
            TranscriptEntry { request, response }
        })
        .collect()
}

pub fn write_transcript<W: Write>(out: &mut W, entries: &[TranscriptEntry]) -> std::io::Result<()> {
    for e in entries {
        serde_json::to_writer(&mut *out, e)?;
        out.write_all(b"\n")?;
    }
    out.flush()
}

pub fn read_transcript<R: BufRead>(input: R) -> Result<Vec<TranscriptEntry>, ServiceError> {
    let mut out = Vec::new();
    for (n, line) in input.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|e| ServiceError::Protocol(format!("line {}: {e}", n + 1)))?);
    }
    Ok(out)
}

/// Replay the requests and compare the serialized responses byte for byte.
/// Returns the index of the first differing entry.
pub fn replay_transcript(worker: &InProcessWorker, entries: &[TranscriptEntry]) -> Result<(), (usize, String)> {
    for (i, e) in entries.iter().enumerate() {
        let got = worker.handle_frame(e.request.clone());
        let a = serde_json::to_string(&got).expect("frame serializes");
        let b = serde_json::to_string(&e.response).expect("frame serializes");
        if a != b {
            return Err((i, a));
        }
    }
    Ok(())
}
