use std::collections::BTreeSet;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::tokenize::tokenize;
use crate::error::{Error, Result};

const DEFAULT_ACCIDENT: &str = include_str!("../../lexicons/accident.txt");
const DEFAULT_CULTURE: &str = include_str!("../../lexicons/culture.txt");

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LexiconKind {
    Accident,
    Culture,
}

impl LexiconKind {
    pub fn file_name(self) -> &'static str {
        match self {
            LexiconKind::Accident => "accident.txt",
            LexiconKind::Culture => "culture.txt",
        }
    }
}

/// A keyword list. Terms are stored lowercased; each term is also kept as a
/// token sequence so phrases match on token boundaries.
#[derive(Debug, Clone)]
pub struct KeywordLexicon {
    kind: LexiconKind,
    terms: BTreeSet<String>,
    phrases: Vec<Vec<String>>,
}

impl KeywordLexicon {
    pub fn new<I, S>(kind: LexiconKind, terms: I) -> Result<Self>
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let terms: BTreeSet<String> = terms
            .into_iter()
            .map(|t| t.as_ref().trim().to_lowercase())
            .filter(|t| !t.is_empty())
            .collect();
        if terms.is_empty() {
            return Err(Error::Config(format!("{kind:?} lexicon is empty")));
        }
        let mut phrases = Vec::with_capacity(terms.len());
        for t in &terms {
            let toks = tokenize(t);
            if toks.is_empty() {
                return Err(Error::Config(format!("lexicon term {t:?} has no tokens")));
            }
            phrases.push(toks);
        }
        phrases.sort();
        phrases.dedup();
        Ok(Self { kind, terms, phrases })
    }

    /// Parses one term per line; blank lines and `#` comments are skipped.
    pub fn parse(kind: LexiconKind, text: &str) -> Result<Self> {
        Self::new(
            kind,
            text.lines()
                .map(str::trim)
                .filter(|l| !l.is_empty() && !l.starts_with('#')),
        )
    }

    pub fn load(kind: LexiconKind, path: &Path) -> Result<Self> {
        Self::parse(kind, &std::fs::read_to_string(path)?)
    }

    /// Loads `accident.txt` / `culture.txt` from `dir`.
    pub fn load_dir(dir: &Path) -> Result<(Self, Self)> {
        Ok((
            Self::load(LexiconKind::Accident, &dir.join(LexiconKind::Accident.file_name()))?,
            Self::load(LexiconKind::Culture, &dir.join(LexiconKind::Culture.file_name()))?,
        ))
    }

    pub fn default_accident() -> Self {
        Self::parse(LexiconKind::Accident, DEFAULT_ACCIDENT).expect("shipped lexicon parses")
    }

    pub fn default_culture() -> Self {
        Self::parse(LexiconKind::Culture, DEFAULT_CULTURE).expect("shipped lexicon parses")
    }

    pub fn default_text(kind: LexiconKind) -> &'static str {
        match kind {
            LexiconKind::Accident => DEFAULT_ACCIDENT,
            LexiconKind::Culture => DEFAULT_CULTURE,
        }
    }

    pub fn kind(&self) -> LexiconKind {
        self.kind
    }

    pub fn terms(&self) -> &BTreeSet<String> {
        &self.terms
    }

    /// True if any term occurs as a consecutive token run.
    pub fn matches_tokens(&self, tokens: &[String]) -> bool {
        self.phrases
            .iter()
            .any(|p| tokens.windows(p.len()).any(|w| w == p.as_slice()))
    }

    pub fn matches(&self, text: &str) -> bool {
        self.matches_tokens(&tokenize(text))
    }
}
