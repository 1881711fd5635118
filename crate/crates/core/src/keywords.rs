//! TF-IDF keyword inference from the descriptions of retrieved apps.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use serde::{Deserialize, Serialize};
use thiserror::Error;

static DEFAULT_STOPWORDS: &str = include_str!("../data/stopwords.txt");

#[derive(Debug, Error, PartialEq, Eq)]
pub enum KeywordError {
    #[error("cannot fit keyword statistics on zero descriptions")]
    EmptyCorpus,
}

pub fn default_stopwords() -> BTreeSet<String> {
    parse_stopwords(DEFAULT_STOPWORDS)
}

/// Whitespace-separated words; `#` starts a comment.
pub fn parse_stopwords(text: &str) -> BTreeSet<String> {
    text.lines()
        .map(|l| l.split('#').next().unwrap_or(""))
        .flat_map(str::split_whitespace)
        .map(str::to_lowercase)
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct TokenizerConfig {
    pub lowercase: bool,
    pub stopwords: BTreeSet<String>,
    pub min_token_len: usize,
}

impl Default for TokenizerConfig {
    fn default() -> Self {
        TokenizerConfig {
            lowercase: true,
            stopwords: default_stopwords(),
            min_token_len: 3,
        }
    }
}

impl TokenizerConfig {
    pub fn tokenize<'a>(&'a self, text: &'a str) -> impl Iterator<Item = String> + 'a {
        text.split(|c: char| !c.is_alphanumeric())
            .filter(|t| !t.is_empty())
            .map(|t| if self.lowercase { t.to_lowercase() } else { t.to_string() })
            .filter(|t| t.chars().count() >= self.min_token_len && !self.stopwords.contains(t))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TfidfModel {
    /// term -> number of descriptions containing it
    pub vocabulary: BTreeMap<String, usize>,
    pub document_count: usize,
    pub tokenizer: TokenizerConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Keyword {
    pub term: String,
    pub score: f64,
}

pub fn fit_tfidf<S: AsRef<str>>(descriptions: &[S], tokenizer: TokenizerConfig) -> Result<TfidfModel, KeywordError> {
    if descriptions.is_empty() {
        return Err(KeywordError::EmptyCorpus);
    }
    let mut vocabulary = BTreeMap::new();
    for d in descriptions {
        let terms: BTreeSet<String> = tokenizer.tokenize(d.as_ref()).collect();
        for t in terms {
            *vocabulary.entry(t).or_insert(0) += 1;
        }
    }
    Ok(TfidfModel {
        vocabulary,
        document_count: descriptions.len(),
        tokenizer,
    })
}

impl TfidfModel {
    pub fn document_frequency(&self, term: &str) -> usize {
        self.vocabulary.get(term).copied().unwrap_or(0)
    }

    /// `ln(N / (1 + df)) + 1`
    pub fn idf(&self, term: &str) -> f64 {
        (self.document_count as f64 / (1 + self.document_frequency(term)) as f64).ln() + 1.0
    }
}

/// Pools the retrieved descriptions into one document and returns the `top`
/// terms by raw term count times idf, ties in lexicographic order.
pub fn infer_keywords<S: AsRef<str>>(model: &TfidfModel, retrieved: &[S], top: usize) -> Vec<Keyword> {
    let mut counts: HashMap<String, usize> = HashMap::new();
    for d in retrieved {
        for t in model.tokenizer.tokenize(d.as_ref()) {
            *counts.entry(t).or_insert(0) += 1;
        }
    }
    let mut scored: Vec<Keyword> = counts
        .into_iter()
        .map(|(term, tf)| Keyword {
            score: tf as f64 * model.idf(&term),
            term,
        })
        .collect();
    scored.sort_by(|a, b| b.score.total_cmp(&a.score).then_with(|| a.term.cmp(&b.term)));
    scored.truncate(top);
    scored
}

#[cfg(test)]
mod tests {
    use super::*;

    fn terms(k: &[Keyword]) -> Vec<&str> {
        k.iter().map(|k| k.term.as_str()).collect()
    }

    #[test]
    fn tokenization_and_min_len() {
        let m = fit_tfidf(&["QR code scanner"], TokenizerConfig::default()).unwrap();
        assert_eq!(m.vocabulary.keys().collect::<Vec<_>>(), ["code", "scanner"]);
        let two = TokenizerConfig {
            min_token_len: 2,
            ..Default::default()
        };
        let m = fit_tfidf(&["QR code scanner"], two).unwrap();
        assert_eq!(m.document_frequency("qr"), 1);
        assert_eq!(m.document_frequency("code"), 1);
        assert_eq!(m.document_frequency("scanner"), 1);
    }

    #[test]
    fn document_frequency_counts_documents() {
        let m = fit_tfidf(&["A game, a GAME!", "another game"], TokenizerConfig::default()).unwrap();
        assert_eq!(m.document_frequency("game"), 2);
        assert_eq!(fit_tfidf::<&str>(&[], TokenizerConfig::default()), Err(KeywordError::EmptyCorpus));
    }

    #[test]
    fn empty_retrieval_gives_no_keywords() {
        let m = fit_tfidf(&["anything here"], TokenizerConfig::default()).unwrap();
        assert!(infer_keywords(&m, &["", ""], 10).is_empty());
        assert!(infer_keywords::<&str>(&m, &[], 10).is_empty());
    }

    #[test]
    fn hand_computed_table() {
        let docs = ["puzzle game levels", "music player", "puzzle music"];
        let m = fit_tfidf(&docs, TokenizerConfig::default()).unwrap();
        // N = 3; df: puzzle 2, game 1, levels 1, music 2, player 1
        let low = (3.0f64 / 3.0).ln() + 1.0;
        let high = (3.0f64 / 2.0).ln() + 1.0;
        let k = infer_keywords(&m, &["puzzle game levels", "puzzle music"], 10);
        // tf: puzzle 2, game 1, levels 1, music 1
        let expected = [
            ("puzzle", 2.0 * low),
            ("game", high),
            ("levels", high),
            ("music", low),
        ];
        assert_eq!(k.len(), expected.len());
        for (kw, (term, score)) in k.iter().zip(expected) {
            assert_eq!(kw.term, term);
            assert!((kw.score - score).abs() < 1e-12, "{term}");
        }
        assert_eq!(terms(&infer_keywords(&m, &["puzzle game levels"], 2)), ["game", "levels"]);
    }
}
