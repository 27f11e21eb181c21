use std::collections::{BTreeSet, HashMap};

use serde::{Deserialize, Serialize};

use crate::text::Lexicon;

pub const UNK: usize = 0;
pub const UNK_TOKEN: &str = "<unk>";

const PROMPT_WORDS: [&str; 8] = ["Possible", "action", "of", "the", "agent", "Goal", "Obs", "Action"];

/// Split text into word tokens. Punctuation used by the prompt template is
/// a separator.
pub fn tokenize(text: &str) -> impl Iterator<Item = &str> {
    text.split(|c: char| c.is_whitespace() || matches!(c, ',' | ':' | ';' | '.'))
        .filter(|w| !w.is_empty())
}

/// Closed word-level vocabulary with a reserved unknown token at id 0.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(from = "Vec<String>", into = "Vec<String>")]
pub struct Vocab {
    tokens: Vec<String>,
    index: HashMap<String, usize>,
}

impl From<Vec<String>> for Vocab {
    fn from(tokens: Vec<String>) -> Self {
        let index = tokens.iter().enumerate().map(|(i, t)| (t.clone(), i)).collect();
        Self { tokens, index }
    }
}

impl From<Vocab> for Vec<String> {
    fn from(v: Vocab) -> Self {
        v.tokens
    }
}

impl Vocab {
    /// Words of the lexicon, the prompt template and the digits.
    pub fn from_lexicon(lex: &Lexicon) -> Self {
        let mut words: BTreeSet<String> = BTreeSet::new();
        for s in lex.all_strings() {
            for w in tokenize(&s) {
                if !w.contains('{') {
                    words.insert(w.to_string());
                }
            }
        }
        words.extend(PROMPT_WORDS.iter().map(|w| w.to_string()));
        words.extend((0..10).map(|d| d.to_string()));
        let mut tokens = vec![UNK_TOKEN.to_string()];
        tokens.extend(words);
        tokens.into()
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn id(&self, word: &str) -> usize {
        self.index.get(word).copied().unwrap_or(UNK)
    }

    pub fn token(&self, id: usize) -> &str {
        &self.tokens[id]
    }

    pub fn encode(&self, text: &str) -> Vec<usize> {
        tokenize(text).map(|w| self.id(w)).collect()
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn covers_the_english_environment() {
        let v = Vocab::from_lexicon(&Lexicon::english());
        for w in ["turn", "left", "forward", "You", "see", "wall", "steps", "3", "Obs"] {
            assert_ne!(v.id(w), UNK, "{w}");
        }
        assert_eq!(v.id("tourner"), UNK);
        assert_eq!(v.encode("Obs. 2: go forward"), vec![v.id("Obs"), v.id("2"), v.id("go"), v.id("forward")]);
    }

    #[test]
    fn serde_round_trip() {
        let v = Vocab::from_lexicon(&Lexicon::english());
        let s = serde_json::to_string(&v).unwrap();
        let back: Vocab = serde_json::from_str(&s).unwrap();
        assert_eq!(v, back);
    }
}
