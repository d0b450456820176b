//! Word-vector storage and cosine distance.
//!
//! Vectors are read from whitespace-separated text files (one word plus its
//! components per line, the usual distribution format for GloVe-style
//! embeddings). The table is immutable after load and safe to share across
//! threads.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::lexicon::normalize;

#[derive(Debug, Error)]
pub enum EmbeddingError {
    #[error("cannot read embedding file {path}: {source}")]
    FileNotReadable {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("no valid embedding line in {path}")]
    EmptyTable { path: String },
    #[error("vector length {got} does not match dimension {expected}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("zero-norm vector")]
    ZeroVector,
}

/// What the loader kept and what it threw away.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct LoadSummary {
    /// Entries stored in the table.
    pub kept: usize,
    /// Lines dropped for structural reasons: wrong component count,
    /// unparseable or non-finite components, zero norm.
    pub skipped_malformed: usize,
    /// Lines whose lowercased word was already present (first wins).
    pub skipped_duplicate: usize,
}

impl LoadSummary {
    pub fn skipped(&self) -> usize {
        self.skipped_malformed + self.skipped_duplicate
    }
}

/// A word → vector map with a single fixed dimension.
///
/// Every stored vector has length `dimension` and nonzero Euclidean norm;
/// keys are lowercased. Lookups normalize the query, so `lookup("Cat.")`
/// finds the entry stored for `cat`.
#[derive(Debug, Clone)]
pub struct EmbeddingTable {
    dimension: usize,
    entries: HashMap<String, Vec<f64>>,
    summary: LoadSummary,
}

impl EmbeddingTable {
    /// Load vectors from a text file, keeping at most `max_words` entries.
    ///
    /// The dimension is fixed by the first line that parses; later lines
    /// with a different component count, non-finite values, or zero norm
    /// are skipped and counted in the [`LoadSummary`].
    pub fn load(path: impl AsRef<Path>, max_words: Option<usize>) -> Result<Self, EmbeddingError> {
        let path = path.as_ref();
        let not_readable = |source| EmbeddingError::FileNotReadable {
            path: path.display().to_string(),
            source,
        };
        let file = File::open(path).map_err(not_readable)?;
        let reader = BufReader::new(file);

        let mut dimension = 0usize;
        let mut entries = HashMap::new();
        let mut summary = LoadSummary::default();

        for line in reader.lines() {
            let line = line.map_err(not_readable)?;
            if line.trim().is_empty() {
                continue;
            }
            let mut fields = line.split_whitespace();
            let word = match fields.next() {
                Some(w) => w,
                None => continue,
            };
            let components: Option<Vec<f64>> = fields
                .map(|f| f.parse::<f64>().ok().filter(|v| v.is_finite()))
                .collect();
            let components = match components {
                Some(c) if !c.is_empty() => c,
                _ => {
                    summary.skipped_malformed += 1;
                    continue;
                }
            };
            if dimension == 0 {
                dimension = components.len();
            }
            if components.len() != dimension {
                summary.skipped_malformed += 1;
                continue;
            }
            if components.iter().map(|v| v * v).sum::<f64>() == 0.0 {
                summary.skipped_malformed += 1;
                continue;
            }
            let key = word.to_lowercase();
            if entries.contains_key(&key) {
                summary.skipped_duplicate += 1;
                continue;
            }
            entries.insert(key, components);
            summary.kept += 1;
            if max_words.is_some_and(|max| summary.kept >= max) {
                break;
            }
        }

        if entries.is_empty() {
            return Err(EmbeddingError::EmptyTable {
                path: path.display().to_string(),
            });
        }
        Ok(Self {
            dimension,
            entries,
            summary,
        })
    }

    /// Build a table directly from `(word, vector)` pairs.
    ///
    /// Rejects vectors whose length differs from `dimension` or whose norm
    /// is zero; keys are normalized the same way the file loader does.
    pub fn from_pairs<I, S>(dimension: usize, pairs: I) -> Result<Self, EmbeddingError>
    where
        I: IntoIterator<Item = (S, Vec<f64>)>,
        S: AsRef<str>,
    {
        let mut entries = HashMap::new();
        let mut summary = LoadSummary::default();
        for (word, vector) in pairs {
            if vector.len() != dimension {
                return Err(EmbeddingError::DimensionMismatch {
                    expected: dimension,
                    got: vector.len(),
                });
            }
            if vector.iter().map(|v| v * v).sum::<f64>() == 0.0 {
                return Err(EmbeddingError::ZeroVector);
            }
            let key = word.as_ref().to_lowercase();
            if entries.contains_key(&key) {
                summary.skipped_duplicate += 1;
                continue;
            }
            entries.insert(key, vector);
            summary.kept += 1;
        }
        if entries.is_empty() {
            return Err(EmbeddingError::EmptyTable {
                path: "<memory>".to_string(),
            });
        }
        Ok(Self {
            dimension,
            entries,
            summary,
        })
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn summary(&self) -> LoadSummary {
        self.summary
    }

    /// Vector for `normalize(word)`, if present. Never fails on unknown words.
    pub fn lookup(&self, word: &str) -> Option<&[f64]> {
        let key = normalize(word);
        if key.is_empty() {
            return None;
        }
        self.entries.get(&key).map(Vec::as_slice)
    }

    /// Like [`lookup`](Self::lookup), but multiword entries also match their
    /// hyphenated spelling (`"ice cream"` resolves to an `ice-cream` row).
    /// No vector averaging: a word either has a direct entry or none.
    pub fn resolve(&self, word: &str) -> Option<&[f64]> {
        let key = normalize(word);
        if key.is_empty() {
            return None;
        }
        if let Some(v) = self.entries.get(&key) {
            return Some(v);
        }
        if key.contains(' ') {
            return self.entries.get(&key.replace(' ', "-")).map(Vec::as_slice);
        }
        None
    }

    /// Iterate over stored keys (arbitrary order).
    pub fn words(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(String::as_str)
    }
}

/// Cosine distance `1 − a·b / (‖a‖‖b‖)`, accumulated in f64.
///
/// Symmetric in its arguments and invariant under positive scaling of
/// either input; the value lies in `[0, 2]` up to rounding.
pub fn cosine_distance(a: &[f64], b: &[f64]) -> Result<f64, EmbeddingError> {
    if a.len() != b.len() {
        return Err(EmbeddingError::DimensionMismatch {
            expected: a.len(),
            got: b.len(),
        });
    }
    let mut dot = 0.0f64;
    let mut norm_a = 0.0f64;
    let mut norm_b = 0.0f64;
    for (x, y) in a.iter().zip(b) {
        dot += x * y;
        norm_a += x * x;
        norm_b += y * y;
    }
    if norm_a == 0.0 || norm_b == 0.0 {
        return Err(EmbeddingError::ZeroVector);
    }
    Ok(1.0 - dot / (norm_a.sqrt() * norm_b.sqrt()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn write_temp(contents: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(contents.as_bytes()).unwrap();
        f
    }

    #[test]
    fn loads_consistent_lines() {
        let f = write_temp("cat 1.0 0.0\ndog 0.0 1.0\nfish 0.5 0.5\n");
        let table = EmbeddingTable::load(f.path(), None).unwrap();
        assert_eq!(table.dimension(), 2);
        assert_eq!(table.len(), 3);
        assert_eq!(table.summary().skipped(), 0);
    }

    #[test]
    fn skips_inconsistent_dimension() {
        let f = write_temp("cat 1.0 0.0\nshort 1.0\ndog 0.0 1.0\n");
        let table = EmbeddingTable::load(f.path(), None).unwrap();
        assert_eq!(table.dimension(), 2);
        assert_eq!(table.len(), 2);
        assert_eq!(table.summary().skipped_malformed, 1);
    }

    #[test]
    fn skips_non_finite_and_zero_norm() {
        let f = write_temp("cat 1.0 0.0\nbad nan 1.0\nzero 0.0 0.0\n");
        let table = EmbeddingTable::load(f.path(), None).unwrap();
        assert_eq!(table.len(), 1);
        assert_eq!(table.summary().skipped_malformed, 2);
    }

    #[test]
    fn first_entry_wins_on_case_collision() {
        let f = write_temp("Cat 1.0 0.0\ncat 0.0 1.0\n");
        let table = EmbeddingTable::load(f.path(), None).unwrap();
        assert_eq!(table.len(), 1);
        assert_eq!(table.summary().skipped_duplicate, 1);
        assert_eq!(table.lookup("cat").unwrap(), &[1.0, 0.0]);
    }

    #[test]
    fn max_words_caps_kept_entries() {
        let f = write_temp("a 1 0\nb 0 1\nc 1 1\n");
        let table = EmbeddingTable::load(f.path(), Some(2)).unwrap();
        assert_eq!(table.len(), 2);
        assert!(table.lookup("a").is_some());
        assert!(table.lookup("c").is_none());
    }

    #[test]
    fn empty_file_is_an_error() {
        let f = write_temp("\n\n");
        assert!(matches!(
            EmbeddingTable::load(f.path(), None),
            Err(EmbeddingError::EmptyTable { .. })
        ));
    }

    #[test]
    fn missing_file_is_an_error() {
        assert!(matches!(
            EmbeddingTable::load("/nonexistent/embeddings.txt", None),
            Err(EmbeddingError::FileNotReadable { .. })
        ));
    }

    #[test]
    fn lookup_normalizes_queries() {
        let f = write_temp("cat 1.0 0.0\n");
        let table = EmbeddingTable::load(f.path(), None).unwrap();
        assert!(table.lookup("Cat").is_some());
        assert!(table.lookup(" cat. ").is_some());
        assert!(table.lookup("qwxzt").is_none());
        assert!(table.lookup("").is_none());
    }

    #[test]
    fn resolve_tries_hyphenated_form() {
        let f = write_temp("ice-cream 1.0 0.0\ncat 0.0 1.0\n");
        let table = EmbeddingTable::load(f.path(), None).unwrap();
        assert!(table.resolve("ice cream").is_some());
        assert!(table.lookup("ice cream").is_none());
        assert!(table.resolve("sea horse").is_none());
    }

    #[test]
    fn deterministic_reload() {
        let f = write_temp("cat 1.0 0.25\ndog -0.5 1.0\nfish 0.125 0.5\n");
        let a = EmbeddingTable::load(f.path(), None).unwrap();
        let b = EmbeddingTable::load(f.path(), None).unwrap();
        assert_eq!(a.dimension(), b.dimension());
        assert_eq!(a.len(), b.len());
        for word in a.words() {
            assert_eq!(a.lookup(word).unwrap(), b.lookup(word).unwrap());
        }
    }

    #[test]
    fn cosine_distance_trivial_cases() {
        assert_eq!(cosine_distance(&[1.0, 0.0], &[1.0, 0.0]).unwrap(), 0.0);
        assert_eq!(cosine_distance(&[1.0, 0.0], &[0.0, 1.0]).unwrap(), 1.0);
        assert_eq!(cosine_distance(&[1.0, 0.0], &[-1.0, 0.0]).unwrap(), 2.0);
    }

    #[test]
    fn cosine_distance_rejects_bad_input() {
        assert!(matches!(
            cosine_distance(&[1.0], &[1.0, 0.0]),
            Err(EmbeddingError::DimensionMismatch { .. })
        ));
        assert!(matches!(
            cosine_distance(&[0.0, 0.0], &[1.0, 0.0]),
            Err(EmbeddingError::ZeroVector)
        ));
    }
}
