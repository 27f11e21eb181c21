use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::lexicon::Lexicon;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum SubstitutionError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("duplicate source word {0:?}")]
    DuplicateKey(String),
    #[error("source word {word:?} does not occur in the {scope} of the lexicon")]
    UnknownSource { word: String, scope: Scope },
    #[error("unknown substitution scope {0:?}")]
    UnknownScope(String),
    #[error("unknown built-in table {0:?}")]
    UnknownTable(String),
    #[error("cannot read table: {0}")]
    Io(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scope {
    Nouns,
    Adjectives,
    Actions,
    FullLanguage,
}

impl Scope {
    pub fn name(self) -> &'static str {
        match self {
            Scope::Nouns => "nouns",
            Scope::Adjectives => "adjectives",
            Scope::Actions => "actions",
            Scope::FullLanguage => "full-language",
        }
    }
}

impl std::fmt::Display for Scope {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Scope {
    type Err = SubstitutionError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "nouns" => Ok(Scope::Nouns),
            "adjectives" => Ok(Scope::Adjectives),
            "actions" => Ok(Scope::Actions),
            "full-language" | "full_language" | "language" => Ok(Scope::FullLanguage),
            other => Err(SubstitutionError::UnknownScope(other.to_string())),
        }
    }
}

/// Word-for-word replacement table.
///
/// Text format: one `source<TAB>replacement` pair per line, `#` comments, and
/// a `# scope: <scope>` header line.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SubstitutionTable {
    pub name: String,
    pub scope: Scope,
    pub mapping: BTreeMap<String, String>,
}

const BUILTIN: [(&str, &str); 7] = [
    ("oov_nouns", include_str!("../../data/tables/oov_nouns.tsv")),
    ("oov_adjectives", include_str!("../../data/tables/oov_adjectives.tsv")),
    ("invented_nouns", include_str!("../../data/tables/invented_nouns.tsv")),
    (
        "invented_adjectives",
        include_str!("../../data/tables/invented_adjectives.tsv"),
    ),
    ("synonym_actions", include_str!("../../data/tables/synonym_actions.tsv")),
    ("french_actions", include_str!("../../data/tables/french_actions.tsv")),
    ("french", include_str!("../../data/tables/french.tsv")),
];

impl SubstitutionTable {
    pub fn new(name: impl Into<String>, scope: Scope, pairs: &[(&str, &str)]) -> Result<Self, SubstitutionError> {
        let mut mapping = BTreeMap::new();
        for (src, dst) in pairs {
            if mapping.insert(src.to_string(), dst.to_string()).is_some() {
                return Err(SubstitutionError::DuplicateKey(src.to_string()));
            }
        }
        Ok(Self {
            name: name.into(),
            scope,
            mapping,
        })
    }

    pub fn parse(name: &str, text: &str) -> Result<Self, SubstitutionError> {
        let mut scope = None;
        let mut mapping = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim_end_matches('\r');
            if line.trim().is_empty() {
                continue;
            }
            if let Some(comment) = line.trim_start().strip_prefix('#') {
                if let Some(s) = comment.trim().strip_prefix("scope:") {
                    scope = Some(s.parse()?);
                }
                continue;
            }
            let (src, dst) = line.split_once('\t').ok_or_else(|| SubstitutionError::Parse {
                line: i + 1,
                message: "expected two tab-separated columns".into(),
            })?;
            if src.is_empty() || dst.trim().is_empty() || dst.contains('\t') {
                return Err(SubstitutionError::Parse {
                    line: i + 1,
                    message: "empty or extra column".into(),
                });
            }
            if mapping.insert(src.to_string(), dst.to_string()).is_some() {
                return Err(SubstitutionError::DuplicateKey(src.to_string()));
            }
        }
        let scope = scope.ok_or_else(|| SubstitutionError::Parse {
            line: 0,
            message: "missing '# scope:' header".into(),
        })?;
        Ok(Self {
            name: name.to_string(),
            scope,
            mapping,
        })
    }

    pub fn load(path: &Path) -> Result<Self, SubstitutionError> {
        let text = std::fs::read_to_string(path).map_err(|e| SubstitutionError::Io(e.to_string()))?;
        let name = path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default();
        Self::parse(&name, &text)
    }

    pub fn builtin(name: &str) -> Result<Self, SubstitutionError> {
        BUILTIN
            .iter()
            .find(|(n, _)| *n == name)
            .map(|(n, text)| Self::parse(n, text))
            .unwrap_or_else(|| Err(SubstitutionError::UnknownTable(name.to_string())))
    }

    pub fn builtin_names() -> impl Iterator<Item = &'static str> {
        BUILTIN.iter().map(|(n, _)| *n)
    }

    /// Source phrases that must not survive in rendered text: every entry
    /// without placeholders whose source is not reused by some replacement.
    pub fn banned_phrases(&self) -> BTreeSet<String> {
        self.mapping
            .keys()
            .filter(|k| !k.contains('{'))
            .filter(|k| !self.mapping.values().any(|v| contains_phrase(v, k)))
            .cloned()
            .collect()
    }
}

/// Whole-word phrase containment.
pub fn contains_phrase(text: &str, phrase: &str) -> bool {
    let words: Vec<&str> = text
        .split(|c: char| !c.is_alphanumeric() && c != '\'')
        .filter(|w| !w.is_empty())
        .collect();
    let needle: Vec<&str> = phrase.split_whitespace().collect();
    !needle.is_empty() && words.windows(needle.len()).any(|w| w == needle.as_slice())
}

/// Replace lexicon entries that equal a source word. All replacements are
/// looked up against the original lexicon, so chained mappings never fire.
pub fn apply_substitutions(lexicon: &Lexicon, table: &SubstitutionTable) -> Result<Lexicon, SubstitutionError> {
    let mut out = lexicon.clone();
    let mut used: BTreeSet<&str> = BTreeSet::new();
    let mut swap = |entry: &mut String| {
        if let Some((k, v)) = table.mapping.get_key_value(entry.as_str()) {
            used.insert(k.as_str());
            *entry = v.clone();
        }
    };
    match table.scope {
        Scope::Nouns => out.nouns.values_mut().for_each(&mut swap),
        Scope::Adjectives => out.adjectives.values_mut().for_each(&mut swap),
        Scope::Actions => out.actions.values_mut().for_each(&mut swap),
        Scope::FullLanguage => {
            out.nouns.values_mut().for_each(&mut swap);
            out.adjectives.values_mut().for_each(&mut swap);
            out.actions.values_mut().for_each(&mut swap);
            out.words.fields_mut().into_iter().for_each(&mut swap);
            out.templates.fields_mut().for_each(&mut swap);
        }
    }
    if let Some(word) = table.mapping.keys().find(|k| !used.contains(k.as_str())) {
        return Err(SubstitutionError::UnknownSource {
            word: word.clone(),
            scope: table.scope,
        });
    }
    if table.scope == Scope::FullLanguage {
        out.language = table.name.clone();
    }
    Ok(out)
}

impl Lexicon {
    /// The English lexicon translated with the built-in French table.
    pub fn french() -> Self {
        let table = SubstitutionTable::builtin("french").expect("built-in table parses");
        let mut lex = apply_substitutions(&Lexicon::english(), &table).expect("built-in table applies");
        lex.language = "fr".into();
        lex
    }

    pub fn with_table(&self, name: &str) -> Result<Self, SubstitutionError> {
        apply_substitutions(self, &SubstitutionTable::builtin(name)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::{ActionId, Color, ObjectDesc, ObjectKind};

    #[test]
    fn every_builtin_table_parses_and_applies() {
        for name in SubstitutionTable::builtin_names() {
            let t = SubstitutionTable::builtin(name).unwrap();
            assert!(!t.mapping.is_empty(), "{name}");
            let lex = apply_substitutions(&Lexicon::english(), &t).unwrap();
            lex.validate().unwrap();
        }
    }

    #[test]
    fn invented_words_render_red_key() {
        let lex = Lexicon::english()
            .with_table("invented_nouns")
            .unwrap()
            .with_table("invented_adjectives")
            .unwrap();
        assert_eq!(
            lex.object_phrase(ObjectDesc::new(ObjectKind::Key, Color::Red)),
            "faze dax"
        );
    }

    #[test]
    fn oov_and_synonym_tables() {
        let lex = Lexicon::english().with_table("oov_adjectives").unwrap();
        assert_eq!(lex.adjectives[&Color::Red], "vermillion");
        let lex = Lexicon::english().with_table("oov_nouns").unwrap();
        assert_eq!(lex.nouns[&ObjectKind::Key], "chair");
        let lex = Lexicon::english().with_table("synonym_actions").unwrap();
        assert_eq!(lex.actions[&ActionId::GoForward], "move ahead");
    }

    #[test]
    fn unknown_source_word_is_an_error() {
        let t = SubstitutionTable::new("t", Scope::Nouns, &[("chair", "x")]).unwrap();
        assert!(matches!(
            apply_substitutions(&Lexicon::english(), &t),
            Err(SubstitutionError::UnknownSource { .. })
        ));
        // nouns table does not reach adjectives
        let t = SubstitutionTable::new("t", Scope::Nouns, &[("red", "x")]).unwrap();
        assert!(apply_substitutions(&Lexicon::english(), &t).is_err());
    }

    #[test]
    fn substitutions_are_simultaneous() {
        let t = SubstitutionTable::new("swap", Scope::Nouns, &[("key", "ball"), ("ball", "key")]).unwrap();
        let lex = apply_substitutions(&Lexicon::english(), &t).unwrap();
        assert_eq!(lex.nouns[&ObjectKind::Key], "ball");
        assert_eq!(lex.nouns[&ObjectKind::Ball], "key");
    }

    #[test]
    fn parse_rejects_duplicates_and_bad_lines() {
        let dup = "# scope: nouns\nkey\ta\nkey\tb\n";
        assert_eq!(
            SubstitutionTable::parse("d", dup),
            Err(SubstitutionError::DuplicateKey("key".into()))
        );
        assert!(SubstitutionTable::parse("d", "# scope: nouns\nkey b\n").is_err());
        assert!(SubstitutionTable::parse("d", "key\tb\n").is_err());
        assert!(SubstitutionTable::parse("d", "# scope: verbs\n").is_err());
    }

    #[test]
    fn banned_phrases_skip_templates() {
        let t = SubstitutionTable::builtin("french").unwrap();
        let banned = t.banned_phrases();
        assert!(banned.contains("red"));
        assert!(banned.contains("turn left"));
        assert!(!banned.iter().any(|w| w.contains('{')));
        assert!(contains_phrase("You see a wall 2 steps left", "steps left"));
        assert!(!contains_phrase("turn left", "left turn"));
        assert!(!contains_phrase("reddish", "red"));
    }
}
