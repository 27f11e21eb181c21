//! Wire format: a 4-byte big-endian length followed by a UTF-8 JSON document
//! `{"id": u64, "type": "...", "payload": {...}}`.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::ServiceError;
use crate::policy::ParamManifest;
use crate::train::{LossConfig, LossStats, Sample};

/// Frames larger than this are rejected.
pub const MAX_FRAME: usize = 256 * 1024 * 1024;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Frame {
    pub id: u64,
    #[serde(rename = "type")]
    pub kind: String,
    #[serde(default)]
    pub payload: Value,
}

pub fn write_frame<W: Write>(w: &mut W, frame: &Frame) -> Result<(), ServiceError> {
    let body = serde_json::to_vec(frame).map_err(|e| ServiceError::Protocol(e.to_string()))?;
    w.write_all(&(body.len() as u32).to_be_bytes())?;
    w.write_all(&body)?;
    w.flush()?;
    Ok(())
}

/// `Ok(None)` on a clean end of stream before a length prefix.
pub fn read_frame_bytes<R: Read>(r: &mut R) -> Result<Option<Vec<u8>>, ServiceError> {
    let mut len = [0u8; 4];
    match r.read_exact(&mut len) {
        Ok(()) => {}
        Err(e) if e.kind() == std::io::ErrorKind::UnexpectedEof => return Ok(None),
        Err(e) => return Err(e.into()),
    }
    let n = u32::from_be_bytes(len) as usize;
    if n > MAX_FRAME {
        return Err(ServiceError::Protocol(format!("frame of {n} bytes exceeds limit")));
    }
    let mut body = vec![0u8; n];
    r.read_exact(&mut body)?;
    Ok(Some(body))
}

pub fn read_frame<R: Read>(r: &mut R) -> Result<Option<Frame>, ServiceError> {
    match read_frame_bytes(r)? {
        None => Ok(None),
        Some(body) => serde_json::from_slice(&body)
            .map(Some)
            .map_err(|e| ServiceError::Protocol(format!("malformed frame: {e}"))),
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Empty {}

/// One prompt's share of a score request.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScoreEntry {
    pub prompt: String,
    pub candidates: Vec<String>,
    pub start: usize,
    pub end: usize,
    #[serde(default)]
    pub want_value: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScoreRequest {
    pub entries: Vec<ScoreEntry>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScoreResult {
    pub scores: Vec<f64>,
    pub value: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScoreResponse {
    pub results: Vec<ScoreResult>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ValueRequest {
    pub prompts: Vec<String>,
    /// Candidate list used to run the backend; action-heads backends need one.
    #[serde(default)]
    pub candidates: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ValueResponse {
    pub values: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct UpdateRequest {
    pub manifest_hash: String,
    pub loss: LossConfig,
    pub samples: Vec<Sample>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GradResponse {
    /// Gradient of the shard's mean loss.
    pub grad: Vec<f64>,
    pub stats: LossStats,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ApplyRequest {
    pub manifest_hash: String,
    pub grad: Vec<f64>,
    pub lr: f64,
    pub max_grad_norm: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ApplyResponse {
    pub digest: String,
    /// Global norm before clipping.
    pub grad_norm: f64,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct HelloResponse {
    pub capabilities: Vec<String>,
    pub manifest: ParamManifest,
    pub mode: crate::policy::PolicyMode,
    pub digest: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DigestResponse {
    pub digest: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ErrorPayload {
    pub message: String,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Request {
    Hello,
    Score(ScoreRequest),
    Value(ValueRequest),
    UpdateGrad(UpdateRequest),
    Apply(ApplyRequest),
    ParamDigest,
    Shutdown,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Response {
    Hello(HelloResponse),
    Score(ScoreResponse),
    Value(ValueResponse),
    UpdateGrad(GradResponse),
    Apply(ApplyResponse),
    ParamDigest(DigestResponse),
    Shutdown,
    Error(String),
}

fn to_value<T: Serialize>(t: &T) -> Value {
    serde_json::to_value(t).expect("message serializes")
}

fn from_value<T: for<'de> Deserialize<'de>>(v: Value) -> Result<T, ServiceError> {
    serde_json::from_value(v).map_err(|e| ServiceError::Protocol(format!("bad payload: {e}")))
}

impl Request {
    pub fn kind(&self) -> &'static str {
        match self {
            Request::Hello => "HELLO",
            Request::Score(_) => "SCORE",
            Request::Value(_) => "VALUE",
            Request::UpdateGrad(_) => "UPDATE_GRAD",
            Request::Apply(_) => "APPLY",
            Request::ParamDigest => "PARAM_DIGEST",
            Request::Shutdown => "SHUTDOWN",
        }
    }

    pub fn to_frame(&self, id: u64) -> Frame {
        let payload = match self {
            Request::Hello | Request::ParamDigest | Request::Shutdown => to_value(&Empty {}),
            Request::Score(r) => to_value(r),
            Request::Value(r) => to_value(r),
            Request::UpdateGrad(r) => to_value(r),
            Request::Apply(r) => to_value(r),
        };
        Frame {
            id,
            kind: self.kind().to_string(),
            payload,
        }
    }

    pub fn from_frame(frame: Frame) -> Result<Self, ServiceError> {
        Ok(match frame.kind.as_str() {
            "HELLO" => Request::Hello,
            "SCORE" => Request::Score(from_value(frame.payload)?),
            "VALUE" => Request::Value(from_value(frame.payload)?),
            "UPDATE_GRAD" => Request::UpdateGrad(from_value(frame.payload)?),
            "APPLY" => Request::Apply(from_value(frame.payload)?),
            "PARAM_DIGEST" => Request::ParamDigest,
            "SHUTDOWN" => Request::Shutdown,
            other => return Err(ServiceError::Protocol(format!("unknown message type {other:?}"))),
        })
    }
}

impl Response {
    pub fn kind(&self) -> &'static str {
        match self {
            Response::Hello(_) => "HELLO",
            Response::Score(_) => "SCORE",
            Response::Value(_) => "VALUE",
            Response::UpdateGrad(_) => "UPDATE_GRAD",
            Response::Apply(_) => "APPLY",
            Response::ParamDigest(_) => "PARAM_DIGEST",
            Response::Shutdown => "SHUTDOWN",
            Response::Error(_) => "ERROR",
        }
    }

    pub fn to_frame(&self, id: u64) -> Frame {
        let payload = match self {
            Response::Hello(r) => to_value(r),
            Response::Score(r) => to_value(r),
            Response::Value(r) => to_value(r),
            Response::UpdateGrad(r) => to_value(r),
            Response::Apply(r) => to_value(r),
            Response::ParamDigest(r) => to_value(r),
            Response::Shutdown => to_value(&Empty {}),
            Response::Error(m) => to_value(&ErrorPayload { message: m.clone() }),
        };
        Frame {
            id,
            kind: self.kind().to_string(),
            payload,
        }
    }

    pub fn from_frame(frame: Frame) -> Result<Self, ServiceError> {
        Ok(match frame.kind.as_str() {
            "HELLO" => Response::Hello(from_value(frame.payload)?),
            "SCORE" => Response::Score(from_value(frame.payload)?),
            "VALUE" => Response::Value(from_value(frame.payload)?),
            "UPDATE_GRAD" => Response::UpdateGrad(from_value(frame.payload)?),
            "APPLY" => Response::Apply(from_value(frame.payload)?),
            "PARAM_DIGEST" => Response::ParamDigest(from_value(frame.payload)?),
            "SHUTDOWN" => Response::Shutdown,
            "ERROR" => Response::Error(from_value::<ErrorPayload>(frame.payload)?.message),
            other => return Err(ServiceError::Protocol(format!("unknown message type {other:?}"))),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn frame_round_trip() {
        let req = Request::Score(ScoreRequest {
            entries: vec![ScoreEntry {
                prompt: "p".into(),
                candidates: vec!["a".into(), "b".into()],
                start: 0,
                end: 2,
                want_value: true,
            }],
        });
        let mut buf = Vec::new();
        write_frame(&mut buf, &req.to_frame(9)).unwrap();
        assert_eq!(u32::from_be_bytes(buf[..4].try_into().unwrap()) as usize, buf.len() - 4);
        let frame = read_frame(&mut buf.as_slice()).unwrap().unwrap();
        assert_eq!(frame.id, 9);
        assert_eq!(Request::from_frame(frame).unwrap(), req);
    }

    #[test]
    fn floats_round_trip_exactly() {
        let xs = vec![0.1 + 0.2, -1.0 / 3.0, 1e-300, std::f64::consts::PI * 1e10];
        let r = Response::Value(ValueResponse { values: xs.clone() });
        let mut buf = Vec::new();
        write_frame(&mut buf, &r.to_frame(1)).unwrap();
        let back = Response::from_frame(read_frame(&mut buf.as_slice()).unwrap().unwrap()).unwrap();
        assert_eq!(back, Response::Value(ValueResponse { values: xs }));
    }

    #[test]
    fn unknown_type_is_rejected() {
        let f = Frame {
            id: 1,
            kind: "NOPE".into(),
            payload: Value::Null,
        };
        assert!(Request::from_frame(f).is_err());
    }
}
