use std::path::Path;

use serde::{Deserialize, Serialize};

use super::EvalError;
use crate::policy::{action_distribution, Normalization, PolicyConfig, PolicyError, ScorerBackend};
use crate::service::ScoreItem;

const DEFAULT_PROBES: &str = include_str!("../../data/probes/default.json");

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Probe {
    pub name: String,
    pub prompt: String,
    pub candidates: Vec<String>,
}

/// Fixed prompts scored after every update to follow how the action
/// distribution moves during training.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ProbeSet {
    pub probes: Vec<Probe>,
}

impl ProbeSet {
    /// Navigation to either side, pick-up near and far, dropping, doors,
    /// then/after orderings and a two-pickup composition.
    pub fn default_set() -> Self {
        Self::parse(DEFAULT_PROBES).expect("built-in probe set parses")
    }

    pub fn parse(json: &str) -> Result<Self, EvalError> {
        let set: ProbeSet = serde_json::from_str(json).map_err(|e| EvalError::Domain(format!("probe set: {e}")))?;
        if set.probes.is_empty() {
            return Err(EvalError::Domain("probe set is empty".into()));
        }
        if let Some(p) = set.probes.iter().find(|p| p.candidates.is_empty()) {
            return Err(EvalError::Domain(format!("probe {} has no candidates", p.name)));
        }
        Ok(set)
    }

    pub fn load(path: &Path) -> Result<Self, EvalError> {
        Self::parse(&std::fs::read_to_string(path).map_err(|e| EvalError::Io(e.to_string()))?)
    }

    pub fn len(&self) -> usize {
        self.probes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probes.is_empty()
    }

    /// The probes `backend` can score. Action-heads models only take
    /// candidate lists of their own length.
    pub fn usable_by(&self, backend: &dyn ScorerBackend) -> Result<Self, EvalError> {
        let mut probes = Vec::new();
        for p in &self.probes {
            match backend.evaluate(&p.prompt, &p.candidates, 0..0, false) {
                Ok(_) => probes.push(p.clone()),
                Err(PolicyError::ActionCount { .. }) => {}
                Err(e) => return Err(e.into()),
            }
        }
        Ok(Self { probes })
    }

    pub fn score_items(&self) -> Vec<ScoreItem> {
        self.probes
            .iter()
            .map(|p| ScoreItem::new(p.prompt.clone(), p.candidates.clone()))
            .collect()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProbeRow {
    pub update: u64,
    pub name: String,
    pub candidates: Vec<String>,
    pub probs: Vec<f64>,
}

pub fn probe_distributions(
    backend: &dyn ScorerBackend,
    probes: &ProbeSet,
    normalization: Normalization,
    update: u64,
) -> Result<Vec<ProbeRow>, EvalError> {
    if probes.is_empty() {
        return Err(EvalError::Domain("probe set is empty".into()));
    }
    let pc = PolicyConfig {
        normalization,
        mode: backend.mode(),
    };
    probes
        .probes
        .iter()
        .map(|p| {
            let e = backend.evaluate(&p.prompt, &p.candidates, 0..p.candidates.len(), false)?;
            Ok(ProbeRow {
                update,
                name: p.name.clone(),
                candidates: p.candidates.clone(),
                probs: action_distribution(&e.raw, pc)?.probs,
            })
        })
        .collect()
}

/// Probe rows accumulated over a run, one batch per update.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ProbeSeries {
    pub rows: Vec<ProbeRow>,
    pub updates: Vec<u64>,
}

impl ProbeSeries {
    pub fn record(&mut self, rows: Vec<ProbeRow>) {
        if let Some(u) = rows.first().map(|r| r.update) {
            self.updates.push(u);
        }
        self.rows.extend(rows);
    }

    pub fn len(&self) -> usize {
        self.updates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.updates.is_empty()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::policy::UniformScorer;

    #[test]
    fn default_set_has_eleven_probes() {
        assert_eq!(ProbeSet::default_set().len(), 11);
    }

    #[test]
    fn uniform_backend_gives_uniform_rows() {
        let rows = probe_distributions(
            &UniformScorer::heads(50),
            &ProbeSet::default_set(),
            Normalization::default(),
            0,
        )
        .unwrap();
        assert_eq!(rows.len(), 11);
        for r in rows {
            let u = 1.0 / r.candidates.len() as f64;
            assert!(r.probs.iter().all(|p| (p - u).abs() < 1e-12));
        }
    }
}
