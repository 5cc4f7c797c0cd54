//! Token vocabulary with a reserved out-of-vocabulary bucket.
//!
//! Index 0 is always the `<oov>` token; every token that was present when the
//! vocabulary was built gets a stable index in sorted order after it. Lookups
//! of unseen tokens fall back to index 0, so embedding tables sized to
//! `len()` are always safe to index with `index_of`.

use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;

use crate::dialogue::Dialogue;

/// Reserved token occupying index 0.
pub const OOV_TOKEN: &str = "<oov>";

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum VocabError {
    /// The empty string cannot be a token.
    EmptyToken,
    /// `<oov>` is implicit and may not be supplied as corpus text.
    ReservedToken,
}

impl fmt::Display for VocabError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            VocabError::EmptyToken => write!(f, "vocabulary tokens must be non-empty"),
            VocabError::ReservedToken => {
                write!(f, "token {OOV_TOKEN:?} is reserved for out-of-vocabulary lookups")
            }
        }
    }
}

/// Immutable token -> index map with `<oov>` pinned at index 0.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocab {
    tokens: Vec<String>,
    index: BTreeMap<String, usize>,
}

impl Vocab {
    /// Builds a vocabulary from raw tokens. Duplicates are collapsed; the
    /// surviving tokens are indexed in sorted order starting at 1.
    pub fn from_tokens<'a, I>(tokens: I) -> Result<Vocab, VocabError>
    where
        I: IntoIterator<Item = &'a str>,
    {
        let mut seen: BTreeMap<String, usize> = BTreeMap::new();
        for tok in tokens {
            if tok.is_empty() {
                return Err(VocabError::EmptyToken);
            }
            if tok == OOV_TOKEN {
                return Err(VocabError::ReservedToken);
            }
            seen.entry(tok.to_string()).or_insert(0);
        }
        let mut list = Vec::with_capacity(seen.len() + 1);
        list.push(OOV_TOKEN.to_string());
        list.extend(seen.into_keys());
        let index = list
            .iter()
            .enumerate()
            .map(|(i, t)| (t.clone(), i))
            .collect();
        Ok(Vocab { tokens: list, index })
    }

    /// Collects every utterance and action-phrase token in the corpus.
    pub fn from_dialogues(dialogues: &[Dialogue]) -> Result<Vocab, VocabError> {
        let mut raw: Vec<&str> = Vec::new();
        for d in dialogues {
            for turn in &d.turns {
                for tok in &turn.utterance {
                    raw.push(tok);
                }
                for phrase in &turn.action {
                    for tok in phrase {
                        raw.push(tok);
                    }
                }
            }
        }
        Vocab::from_tokens(raw)
    }

    /// Rebuilds a vocabulary from a previously serialized token list, which
    /// must start with the reserved token.
    pub fn from_saved(tokens: Vec<String>) -> Result<Vocab, VocabError> {
        if tokens.first().map(String::as_str) != Some(OOV_TOKEN) {
            return Err(VocabError::ReservedToken);
        }
        for t in &tokens[1..] {
            if t.is_empty() {
                return Err(VocabError::EmptyToken);
            }
            if t == OOV_TOKEN {
                return Err(VocabError::ReservedToken);
            }
        }
        let index = tokens
            .iter()
            .enumerate()
            .map(|(i, t)| (t.clone(), i))
            .collect();
        Ok(Vocab { tokens, index })
    }

    /// Number of indices, including the reserved bucket.
    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        false // index 0 always exists
    }

    /// Index of a token, or 0 when it was not seen at build time.
    pub fn index_of(&self, token: &str) -> usize {
        self.index.get(token).copied().unwrap_or(0)
    }

    /// Index of a token that was actually seen at build time, without the
    /// out-of-vocabulary fallback.
    pub fn lookup(&self, token: &str) -> Option<usize> {
        self.index.get(token).copied()
    }

    /// Token at an index; panics if out of range (caller sized the table).
    pub fn token(&self, index: usize) -> &str {
        &self.tokens[index]
    }

    /// All tokens in index order (element 0 is the reserved bucket).
    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }
}
