use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{run_eval, Agent, EvalError, EvalReport};
use crate::env::{EpisodeConfig, TargetFilter, TaskFamily};
use crate::text::Lexicon;

/// A perturbation of the evaluation setting.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GeneralizationVariant {
    NoChange,
    OovNouns,
    OovAdjectives,
    Invented,
    UnseenInVocab,
    ComposePickup,
    SynonymActions,
    FrenchFull,
    FrenchActionsOnly,
}

impl GeneralizationVariant {
    pub const ALL: [GeneralizationVariant; 9] = [
        GeneralizationVariant::NoChange,
        GeneralizationVariant::OovNouns,
        GeneralizationVariant::OovAdjectives,
        GeneralizationVariant::Invented,
        GeneralizationVariant::UnseenInVocab,
        GeneralizationVariant::ComposePickup,
        GeneralizationVariant::SynonymActions,
        GeneralizationVariant::FrenchFull,
        GeneralizationVariant::FrenchActionsOnly,
    ];

    pub fn name(self) -> &'static str {
        match self {
            GeneralizationVariant::NoChange => "no_change",
            GeneralizationVariant::OovNouns => "oov_nouns",
            GeneralizationVariant::OovAdjectives => "oov_adjectives",
            GeneralizationVariant::Invented => "invented",
            GeneralizationVariant::UnseenInVocab => "unseen_in_vocab",
            GeneralizationVariant::ComposePickup => "compose_pickup",
            GeneralizationVariant::SynonymActions => "synonym_actions",
            GeneralizationVariant::FrenchFull => "french_full",
            GeneralizationVariant::FrenchActionsOnly => "french_actions_only",
        }
    }

    /// Substitution tables applied, in order, to the base lexicon.
    pub fn tables(self) -> &'static [&'static str] {
        match self {
            GeneralizationVariant::OovNouns => &["oov_nouns"],
            GeneralizationVariant::OovAdjectives => &["oov_adjectives"],
            GeneralizationVariant::Invented => &["invented_nouns", "invented_adjectives"],
            GeneralizationVariant::SynonymActions => &["synonym_actions"],
            GeneralizationVariant::FrenchFull => &["french"],
            GeneralizationVariant::FrenchActionsOnly => &["french_actions"],
            _ => &[],
        }
    }

    /// Episode configuration and lexicon for this variant.
    pub fn setup(self, base: &EpisodeConfig, lexicon: &Lexicon) -> Result<(EpisodeConfig, Lexicon), EvalError> {
        let mut lex = lexicon.clone();
        for t in self.tables() {
            lex = lex.with_table(t)?;
        }
        let mut cfg = base.clone();
        match self {
            GeneralizationVariant::UnseenInVocab => {
                cfg.targets = TargetFilter {
                    allowed: Some(TargetFilter::unseen_objects()),
                    excluded: Vec::new(),
                };
            }
            GeneralizationVariant::ComposePickup => {
                cfg.task_families = TaskFamily::COMPOSE_PICKUP.to_vec();
            }
            _ => {}
        }
        Ok((cfg, lex))
    }
}

impl fmt::Display for GeneralizationVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for GeneralizationVariant {
    type Err = EvalError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .into_iter()
            .find(|v| v.name() == s)
            .ok_or_else(|| EvalError::Domain(format!("unknown generalization variant {s:?}")))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VariantReport {
    pub variant: GeneralizationVariant,
    pub report: EvalReport,
    /// Success rate minus the no_change success rate.
    pub delta_vs_no_change: f64,
}

/// Evaluate `agent` under every variant. The no_change setting is always
/// evaluated to provide the reference for the deltas.
pub fn run_generalization_suite(
    agent: &Agent<'_>,
    base: &EpisodeConfig,
    lexicon: &Lexicon,
    variants: &[GeneralizationVariant],
    n_episodes: usize,
    seeds: &[u64],
) -> Result<Vec<VariantReport>, EvalError> {
    let reference = run_eval(agent, base, lexicon, n_episodes, seeds)?;
    variants
        .iter()
        .map(|&v| {
            let report = if v == GeneralizationVariant::NoChange {
                reference.clone()
            } else {
                let (cfg, lex) = v.setup(base, lexicon)?;
                run_eval(agent, &cfg, &lex, n_episodes, seeds)?
            };
            Ok(VariantReport {
                variant: v,
                delta_vs_no_change: report.success_rate - reference.success_rate,
                report,
            })
        })
        .collect()
}
