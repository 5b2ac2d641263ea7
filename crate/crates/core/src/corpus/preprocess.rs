use std::collections::{BTreeSet, HashSet};
use std::path::Path;

use unicode_normalization::UnicodeNormalization;

use super::porter::porter_stem;
use crate::error::{Error, Result};

/// Bundled English stop-word list, one word per line.
pub const DEFAULT_STOPWORDS: &str = include_str!("../../data/stopwords_en.txt");

#[derive(Debug, Clone)]
pub struct PreprocessConfig {
    stopwords: HashSet<String>,
    pub min_token_length: usize,
    pub alphabetic_only: bool,
    pub stemming_enabled: bool,
}

impl Default for PreprocessConfig {
    fn default() -> Self {
        PreprocessConfig {
            stopwords: parse_word_list(DEFAULT_STOPWORDS),
            min_token_length: 3,
            alphabetic_only: true,
            stemming_enabled: true,
        }
    }
}

fn parse_word_list(text: &str) -> HashSet<String> {
    text.lines()
        .map(|l| l.trim())
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(|l| l.to_lowercase())
        .collect()
}

impl PreprocessConfig {
    /// Replaces the stop-word set. Entries are lowercased.
    pub fn with_stopwords<I, S>(mut self, words: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        self.stopwords = words
            .into_iter()
            .map(|w| w.as_ref().trim().to_lowercase())
            .filter(|w| !w.is_empty())
            .collect();
        self
    }

    pub fn with_stopword_file(self, path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let words = parse_word_list(&text);
        Ok(self.with_stopwords(words))
    }

    pub fn with_min_token_length(mut self, n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidInput("min_token_length must be >= 1".into()));
        }
        self.min_token_length = n;
        Ok(self)
    }

    pub fn is_stopword(&self, token: &str) -> bool {
        self.stopwords.contains(token)
    }

    pub fn stopword_count(&self) -> usize {
        self.stopwords.len()
    }
}

/// NFC-normalizes, splits on non-alphanumeric characters and lowercases.
///
/// Non-ASCII letters stay inside their token so that the alphabetic filter
/// later drops the whole token instead of leaving an ASCII fragment behind.
pub fn tokenize(text: &str) -> Vec<String> {
    let normalized: String = text.nfc().collect();
    normalized
        .split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(|t| t.to_lowercase())
        .collect()
}

/// Runs the six preprocessing steps and returns the distinct stems.
pub fn preprocess(text: &str, cfg: &PreprocessConfig) -> BTreeSet<String> {
    tokenize(text)
        .into_iter()
        .filter(|t| !cfg.is_stopword(t))
        .filter(|t| !cfg.alphabetic_only || t.bytes().all(|b| b.is_ascii_lowercase()))
        .filter(|t| t.chars().count() >= cfg.min_token_length)
        .map(|t| {
            if cfg.stemming_enabled {
                porter_stem(&t)
            } else {
                t
            }
        })
        .collect()
}
