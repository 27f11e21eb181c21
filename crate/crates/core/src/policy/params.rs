use std::ops::Range;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParamBlock {
    pub name: String,
    pub shape: Vec<usize>,
    pub offset: usize,
}

impl ParamBlock {
    pub fn len(&self) -> usize {
        self.shape.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn range(&self) -> Range<usize> {
        self.offset..self.offset + self.len()
    }
}

/// Named slices of one flat parameter vector.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParamLayout {
    pub blocks: Vec<ParamBlock>,
}

impl ParamLayout {
    pub fn add(&mut self, name: &str, shape: &[usize]) -> Range<usize> {
        let offset = self.len();
        let block = ParamBlock {
            name: name.to_string(),
            shape: shape.to_vec(),
            offset,
        };
        let r = block.range();
        self.blocks.push(block);
        r
    }

    pub fn len(&self) -> usize {
        self.blocks.last().map_or(0, |b| b.offset + b.len())
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn manifest(&self, tag: &str) -> ParamManifest {
        let mut h = Sha256::new();
        h.update(tag.as_bytes());
        for b in &self.blocks {
            h.update(b.name.as_bytes());
            for d in &b.shape {
                h.update((*d as u64).to_le_bytes());
            }
        }
        ParamManifest {
            count: self.len(),
            hash: hex::encode(h.finalize()),
        }
    }
}

/// Parameter count plus a hash of the layout, used to detect mismatched
/// models across processes.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ParamManifest {
    pub count: usize,
    pub hash: String,
}

/// SHA-256 over the little-endian bytes of the parameters.
pub fn param_digest(params: &[f64]) -> String {
    let mut h = Sha256::new();
    for p in params {
        h.update(p.to_le_bytes());
    }
    hex::encode(h.finalize())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn blocks_are_contiguous() {
        let mut l = ParamLayout::default();
        assert_eq!(l.add("a", &[2, 3]), 0..6);
        assert_eq!(l.add("b", &[4]), 6..10);
        assert_eq!(l.len(), 10);
        let mut other = ParamLayout::default();
        other.add("a", &[3, 2]);
        other.add("b", &[4]);
        assert_ne!(l.manifest("m").hash, other.manifest("m").hash);
    }

    #[test]
    fn digest_detects_single_bit_changes() {
        let a: Vec<f64> = vec![0.5, -1.0];
        let mut b = a.clone();
        b[1] = f64::from_bits(b[1].to_bits() ^ 1);
        assert_ne!(param_digest(&a), param_digest(&b));
        assert_eq!(param_digest(&a), param_digest(&a.clone()));
    }
}
