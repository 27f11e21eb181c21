//! Binary checkpoint: magic, version, JSON header, then little-endian f64
//! arrays (parameters, optionally Adam moments).

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::backend::{ScorerBackend, UniformScorer};
use super::model::{BuiltinModel, ModelSpec};
use super::params::ParamManifest;
use super::PolicyError;
use crate::optim::{Adam, AdamConfig};

pub const MAGIC: &[u8; 4] = b"TGCK";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
struct Header {
    kind: String,
    spec: serde_json::Value,
    manifest: ParamManifest,
    adam: Option<(AdamConfig, u64)>,
    extra: serde_json::Value,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint {
    pub kind: String,
    pub spec: serde_json::Value,
    pub manifest: ParamManifest,
    pub params: Vec<f64>,
    pub optimizer: Option<Adam>,
    /// Caller-defined state (training counters, RNG positions, ...).
    pub extra: serde_json::Value,
}

fn push_f64s(out: &mut Vec<u8>, xs: &[f64]) {
    for x in xs {
        out.extend_from_slice(&x.to_le_bytes());
    }
}

fn read_f64s(bytes: &[u8], n: usize, at: &mut usize) -> Result<Vec<f64>, PolicyError> {
    let end = *at + n * 8;
    let chunk = bytes
        .get(*at..end)
        .ok_or_else(|| PolicyError::Checkpoint("truncated parameter data".into()))?;
    *at = end;
    Ok(chunk
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
        .collect())
}

impl Checkpoint {
    pub fn capture(backend: &dyn ScorerBackend, optimizer: Option<&Adam>, extra: serde_json::Value) -> Self {
        Self {
            kind: backend.kind().to_string(),
            spec: backend.spec_json(),
            manifest: backend.manifest(),
            params: backend.params().to_vec(),
            optimizer: optimizer.cloned(),
            extra,
        }
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let header = Header {
            kind: self.kind.clone(),
            spec: self.spec.clone(),
            manifest: self.manifest.clone(),
            adam: self.optimizer.as_ref().map(|a| (a.config, a.t)),
            extra: self.extra.clone(),
        };
        let json = serde_json::to_vec(&header).expect("header serializes");
        let mut out = Vec::with_capacity(12 + json.len() + self.params.len() * 24);
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
        out.extend_from_slice(&(json.len() as u32).to_le_bytes());
        out.extend_from_slice(&json);
        push_f64s(&mut out, &self.params);
        if let Some(a) = &self.optimizer {
            push_f64s(&mut out, &a.m);
            push_f64s(&mut out, &a.v);
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, PolicyError> {
        let bad = |m: &str| PolicyError::Checkpoint(m.to_string());
        if bytes.len() < 12 || &bytes[..4] != MAGIC {
            return Err(bad("not a checkpoint file"));
        }
        let version = u32::from_le_bytes(bytes[4..8].try_into().expect("4 bytes"));
        if version != FORMAT_VERSION {
            return Err(bad(&format!("unsupported checkpoint version {version}")));
        }
        let len = u32::from_le_bytes(bytes[8..12].try_into().expect("4 bytes")) as usize;
        let json = bytes.get(12..12 + len).ok_or_else(|| bad("truncated header"))?;
        let header: Header = serde_json::from_slice(json).map_err(|e| bad(&e.to_string()))?;
        let mut at = 12 + len;
        let n = header.manifest.count;
        let params = read_f64s(bytes, n, &mut at)?;
        let optimizer = match header.adam {
            Some((config, t)) => {
                let m = read_f64s(bytes, n, &mut at)?;
                let v = read_f64s(bytes, n, &mut at)?;
                Some(Adam { config, m, v, t })
            }
            None => None,
        };
        if at != bytes.len() {
            return Err(bad("trailing bytes"));
        }
        Ok(Self {
            kind: header.kind,
            spec: header.spec,
            manifest: header.manifest,
            params,
            optimizer,
            extra: header.extra,
        })
    }

    /// Write to a sibling temporary file and rename it into place.
    pub fn save(&self, path: &Path) -> std::io::Result<()> {
        if let Some(dir) = path.parent() {
            std::fs::create_dir_all(dir)?;
        }
        let tmp = path.with_extension("tmp");
        let mut f = std::fs::File::create(&tmp)?;
        f.write_all(&self.to_bytes())?;
        f.sync_all()?;
        std::fs::rename(tmp, path)
    }

    pub fn load(path: &Path) -> Result<Self, PolicyError> {
        let bytes = std::fs::read(path).map_err(|e| PolicyError::Checkpoint(format!("{}: {e}", path.display())))?;
        Self::from_bytes(&bytes)
    }

    pub fn into_backend(self) -> Result<Box<dyn ScorerBackend>, PolicyError> {
        let bad = |e: serde_json::Error| PolicyError::Checkpoint(e.to_string());
        let backend: Box<dyn ScorerBackend> = match self.kind.as_str() {
            "builtin" => {
                let spec: ModelSpec = serde_json::from_value(self.spec).map_err(bad)?;
                Box::new(BuiltinModel::from_parts(spec, self.params)?)
            }
            "uniform" => Box::new(serde_json::from_value::<UniformScorer>(self.spec).map_err(bad)?),
            other => return Err(PolicyError::Checkpoint(format!("unknown backend kind {other:?}"))),
        };
        if backend.manifest() != self.manifest {
            return Err(PolicyError::ManifestMismatch {
                expected: self.manifest.hash,
                got: backend.manifest().hash,
            });
        }
        Ok(backend)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::policy::{ModelDims, Vocab};
    use crate::text::Lexicon;

    #[test]
    fn round_trip_preserves_scores_and_optimizer() {
        let m = BuiltinModel::token_scorer(Vocab::from_lexicon(&Lexicon::english()), ModelDims::tiny(), 5);
        let mut adam = Adam::new(AdamConfig::default(), m.params().len());
        adam.m[0] = 0.25;
        adam.t = 3;
        let ck = Checkpoint::capture(&m, Some(&adam), serde_json::json!({"update": 7}));
        let back = Checkpoint::from_bytes(&ck.to_bytes()).unwrap();
        assert_eq!(back, ck);
        let restored = back.into_backend().unwrap();
        let c = vec!["go forward".to_string(), "drop".to_string()];
        let p = "Goal of the agent: go to the red ball\nObs. 0: You see a wall 1 step forward\nAction 0:";
        assert_eq!(
            restored.evaluate(p, &c, 0..2, true).unwrap(),
            m.evaluate(p, &c, 0..2, true).unwrap()
        );
    }

    #[test]
    fn rejects_garbage() {
        assert!(Checkpoint::from_bytes(b"nope").is_err());
        let m = UniformScorer::new(4);
        let mut bytes = Checkpoint::capture(&m, None, serde_json::Value::Null).to_bytes();
        bytes.push(0);
        assert!(Checkpoint::from_bytes(&bytes).is_err());
    }
}
