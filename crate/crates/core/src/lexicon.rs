//! Noun validity, normalization, surprisal, and random-noun sampling.
//!
//! The lexicon decides which generated words count as nouns; the frequency
//! table turns words into surprisal (negative log relative frequency).
//! Both are immutable after load.

use std::collections::{BTreeSet, HashMap};
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::embedding::EmbeddingTable;

#[derive(Debug, Error)]
pub enum LexiconError {
    #[error("cannot read {path}: {source}")]
    FileNotReadable {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("no lexicon entry parsed from {path}")]
    EmptyLexicon { path: String },
    #[error("no frequency entry parsed from {path}")]
    EmptyFrequencies { path: String },
    #[error("need {needed} distinct valid nouns but only {available} are in both lexicon and embeddings")]
    InsufficientVocabulary { needed: usize, available: usize },
}

/// Canonical word form: lowercased, trimmed, leading/trailing punctuation
/// stripped, internal whitespace runs collapsed to one space.
///
/// Idempotent; may return the empty string (e.g. for `"---"`).
pub fn normalize(word: &str) -> String {
    let lower = word.to_lowercase();
    let stripped = lower.trim_matches(|c: char| !c.is_alphanumeric());
    stripped.split_whitespace().collect::<Vec<_>>().join(" ")
}

/// Which on-disk format a noun list uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LexiconFormat {
    /// WordNet index file: lemma is the first whitespace-delimited field,
    /// license/comment lines start with two spaces, multiword lemmas are
    /// underscore-joined.
    WordNet,
    /// One word per line.
    Plain,
}

impl std::str::FromStr for LexiconFormat {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_lowercase().as_str() {
            "wordnet" => Ok(Self::WordNet),
            "plain" => Ok(Self::Plain),
            other => Err(format!("unknown lexicon format {other:?} (expected wordnet|plain)")),
        }
    }
}

/// The set of noun lemmas considered valid answers.
///
/// Stored sorted so that seeded sampling is reproducible across runs.
#[derive(Debug, Clone)]
pub struct NounLexicon {
    nouns: BTreeSet<String>,
}

impl NounLexicon {
    pub fn load(path: impl AsRef<Path>, format: LexiconFormat) -> Result<Self, LexiconError> {
        let path = path.as_ref();
        let not_readable = |source| LexiconError::FileNotReadable {
            path: path.display().to_string(),
            source,
        };
        let file = File::open(path).map_err(not_readable)?;
        let reader = BufReader::new(file);

        let mut nouns = BTreeSet::new();
        for line in reader.lines() {
            let line = line.map_err(not_readable)?;
            let lemma = match format {
                LexiconFormat::WordNet => {
                    if line.starts_with("  ") {
                        continue;
                    }
                    match line.split_whitespace().next() {
                        Some(first) => first.replace('_', " "),
                        None => continue,
                    }
                }
                LexiconFormat::Plain => line,
            };
            let normalized = normalize(&lemma);
            if !normalized.is_empty() {
                nouns.insert(normalized);
            }
        }
        if nouns.is_empty() {
            return Err(LexiconError::EmptyLexicon {
                path: path.display().to_string(),
            });
        }
        Ok(Self { nouns })
    }

    /// Build a lexicon from an in-memory word list (normalizing each entry).
    pub fn from_words<I, S>(words: I) -> Result<Self, LexiconError>
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let nouns: BTreeSet<String> = words
            .into_iter()
            .map(|w| normalize(w.as_ref()))
            .filter(|w| !w.is_empty())
            .collect();
        if nouns.is_empty() {
            return Err(LexiconError::EmptyLexicon {
                path: "<memory>".to_string(),
            });
        }
        Ok(Self { nouns })
    }

    pub fn contains(&self, word: &str) -> bool {
        self.nouns.contains(word)
    }

    pub fn len(&self) -> usize {
        self.nouns.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nouns.is_empty()
    }

    /// Sorted iteration over lemmas.
    pub fn iter(&self) -> impl Iterator<Item = &str> {
        self.nouns.iter().map(String::as_str)
    }

    /// The lemma under which `word` counts as a noun, if any.
    ///
    /// Accepts the normalized surface form directly, or its naive singular
    /// (trailing `s` stripped) when that form is listed. The singular
    /// fallback is a documented approximation, not a lemmatizer.
    pub fn match_lemma(&self, word: &str) -> Option<String> {
        let normalized = normalize(word);
        if normalized.is_empty() {
            return None;
        }
        if self.nouns.contains(&normalized) {
            return Some(normalized);
        }
        if let Some(singular) = normalized.strip_suffix('s') {
            if !singular.is_empty() && self.nouns.contains(singular) {
                return Some(singular.to_string());
            }
        }
        None
    }
}

/// The scoring form of a word: the lexicon lemma, provided it has a vector.
///
/// This is the single rule used everywhere a word must be both a noun and
/// embeddable; multiword lemmas resolve through their hyphenated spelling
/// (see [`EmbeddingTable::resolve`]).
pub fn resolve_scoring_word(
    word: &str,
    lexicon: &NounLexicon,
    table: &EmbeddingTable,
) -> Option<String> {
    let lemma = lexicon.match_lemma(word)?;
    table.resolve(&lemma).map(|_| lemma)
}

/// True iff `word` normalizes to a noun lemma that also has a vector.
pub fn is_valid_word(word: &str, lexicon: &NounLexicon, table: &EmbeddingTable) -> bool {
    resolve_scoring_word(word, lexicon, table).is_some()
}

/// Uniform draw of `k` distinct valid nouns from the intersection of the
/// lexicon and the embedding vocabulary. Deterministic for a fixed seed.
pub fn sample_random_nouns(
    lexicon: &NounLexicon,
    table: &EmbeddingTable,
    k: usize,
    seed: u64,
) -> Result<Vec<String>, LexiconError> {
    let mut pool: Vec<&str> = lexicon
        .iter()
        .filter(|w| table.resolve(w).is_some())
        .collect();
    if pool.len() < k {
        return Err(LexiconError::InsufficientVocabulary {
            needed: k,
            available: pool.len(),
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (chosen, _) = pool.partial_shuffle(&mut rng, k);
    Ok(chosen.iter().map(|w| w.to_string()).collect())
}

/// Word → relative frequency map backing surprisal.
#[derive(Debug, Clone)]
pub struct FrequencyTable {
    freq: HashMap<String, f64>,
    total_tokens: u64,
}

impl FrequencyTable {
    /// Load `word<TAB>count` lines. Counts for words that collide after
    /// normalization are summed; lines without a positive integer count are
    /// skipped.
    pub fn load(path: impl AsRef<Path>) -> Result<Self, LexiconError> {
        let path = path.as_ref();
        let not_readable = |source| LexiconError::FileNotReadable {
            path: path.display().to_string(),
            source,
        };
        let file = File::open(path).map_err(not_readable)?;
        let reader = BufReader::new(file);

        let mut counts: HashMap<String, u64> = HashMap::new();
        for line in reader.lines() {
            let line = line.map_err(not_readable)?;
            let Some((word, count)) = line.split_once('\t') else {
                continue;
            };
            let Ok(count) = count.trim().parse::<u64>() else {
                continue;
            };
            if count == 0 {
                continue;
            }
            let normalized = normalize(word);
            if normalized.is_empty() {
                continue;
            }
            *counts.entry(normalized).or_insert(0) += count;
        }
        Self::from_counts(counts).map_err(|_| LexiconError::EmptyFrequencies {
            path: path.display().to_string(),
        })
    }

    pub fn from_counts<I, S>(counts: I) -> Result<Self, LexiconError>
    where
        I: IntoIterator<Item = (S, u64)>,
        S: AsRef<str>,
    {
        let mut merged: HashMap<String, u64> = HashMap::new();
        for (word, count) in counts {
            if count == 0 {
                continue;
            }
            let normalized = normalize(word.as_ref());
            if normalized.is_empty() {
                continue;
            }
            *merged.entry(normalized).or_insert(0) += count;
        }
        let total_tokens: u64 = merged.values().sum();
        if total_tokens == 0 {
            return Err(LexiconError::EmptyFrequencies {
                path: "<memory>".to_string(),
            });
        }
        let freq = merged
            .into_iter()
            .map(|(w, c)| (w, c as f64 / total_tokens as f64))
            .collect();
        Ok(Self { freq, total_tokens })
    }

    /// Relative frequency of the normalized word, if recorded.
    pub fn relative(&self, word: &str) -> Option<f64> {
        self.freq.get(&normalize(word)).copied()
    }

    pub fn total_tokens(&self) -> u64 {
        self.total_tokens
    }

    pub fn len(&self) -> usize {
        self.freq.len()
    }

    pub fn is_empty(&self) -> bool {
        self.freq.is_empty()
    }
}

/// Surprisal −ln(relative frequency), natural log.
///
/// Unknown words get the add-one floor −ln(1 / (total_tokens + 1)) instead
/// of an error, so analyses survive rare model outputs.
pub fn surprisal(word: &str, freq: &FrequencyTable) -> f64 {
    match freq.relative(word) {
        Some(rf) => -rf.ln(),
        None => ((freq.total_tokens() + 1) as f64).ln(),
    }
}
