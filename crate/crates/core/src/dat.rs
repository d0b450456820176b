//! Answer validation and the divergent-association score.
//!
//! An answer is scanned in order, each word normalized and checked against
//! the noun lexicon and the embedding vocabulary; scanning stops once the
//! scoring count (seven by default) is reached. The score of an accepted
//! list is 100/(n(n−1)) times the sum of pairwise cosine distances over all
//! ordered pairs, which equals 100 times the mean over unordered pairs.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::embedding::{cosine_distance, EmbeddingTable};
use crate::lexicon::{normalize, surprisal, FrequencyTable, NounLexicon};

/// Headline scoring count: answers with fewer valid words are excluded
/// from aggregate statistics.
pub const DEFAULT_SCORING_COUNT: usize = 7;

#[derive(Debug, Error)]
pub enum DatError {
    #[error("word {0:?} has no embedding")]
    UnknownWord(String),
    #[error("need at least 2 words, got {0}")]
    TooFewWords(usize),
}

/// Why a word was rejected during validation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RejectReason {
    /// Normalization left nothing (empty or punctuation-only input).
    Empty,
    /// Same lemma as an already-accepted word.
    Duplicate,
    /// Not a known noun lemma (nor a naive singular of one).
    NotInLexicon,
    /// Known noun, but absent from the embedding vocabulary.
    NoEmbedding,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Rejection {
    pub word: String,
    pub reason: RejectReason,
}

/// One raw generated word list and what validation made of it.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Answer {
    /// The list as produced by the generator, untouched.
    pub raw_words: Vec<String>,
    /// Accepted lemmas in raw order, deduplicated, at most the scoring count.
    pub valid_words: Vec<String>,
    /// Examined-and-rejected words with reasons. Words after the k-th
    /// acceptance are never examined and appear in neither list.
    pub rejected: Vec<Rejection>,
}

/// Knobs for [`select_valid_words_with`]; `dedup` exists for sensitivity
/// checks only and defaults to on.
#[derive(Debug, Clone, Copy)]
pub struct SelectOptions {
    pub scoring_count: usize,
    pub dedup: bool,
}

impl Default for SelectOptions {
    fn default() -> Self {
        Self {
            scoring_count: DEFAULT_SCORING_COUNT,
            dedup: true,
        }
    }
}

/// Scan `raw` in order and keep the first `k` valid words.
pub fn select_valid_words(
    raw: &[String],
    lexicon: &NounLexicon,
    table: &EmbeddingTable,
    k: usize,
) -> Answer {
    select_valid_words_with(
        raw,
        lexicon,
        table,
        SelectOptions {
            scoring_count: k,
            dedup: true,
        },
    )
}

pub fn select_valid_words_with(
    raw: &[String],
    lexicon: &NounLexicon,
    table: &EmbeddingTable,
    options: SelectOptions,
) -> Answer {
    let mut answer = Answer {
        raw_words: raw.to_vec(),
        ..Answer::default()
    };
    for word in raw {
        if answer.valid_words.len() >= options.scoring_count {
            break;
        }
        let reject = |reason| Rejection {
            word: word.clone(),
            reason,
        };
        if normalize(word).is_empty() {
            answer.rejected.push(reject(RejectReason::Empty));
            continue;
        }
        let Some(lemma) = lexicon.match_lemma(word) else {
            answer.rejected.push(reject(RejectReason::NotInLexicon));
            continue;
        };
        if options.dedup && answer.valid_words.contains(&lemma) {
            answer.rejected.push(reject(RejectReason::Duplicate));
            continue;
        }
        if table.resolve(&lemma).is_none() {
            answer.rejected.push(reject(RejectReason::NoEmbedding));
            continue;
        }
        answer.valid_words.push(lemma);
    }
    answer
}

/// A scored word list.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatResult {
    /// 100 × mean pairwise cosine distance.
    pub score: f64,
    /// Number of words scored.
    pub n: usize,
    /// The words the score was computed over.
    pub words: Vec<String>,
    /// Symmetric n×n cosine-distance matrix with zero diagonal.
    pub matrix: Vec<Vec<f64>>,
    /// Arithmetic mean surprisal of the scored words.
    pub mean_surprisal: f64,
}

fn resolve_vectors<'t>(
    words: &[String],
    table: &'t EmbeddingTable,
) -> Result<Vec<&'t [f64]>, DatError> {
    words
        .iter()
        .map(|w| {
            table
                .resolve(w)
                .ok_or_else(|| DatError::UnknownWord(w.clone()))
        })
        .collect()
}

/// Pairwise cosine-distance matrix over the words' vectors.
pub fn distance_matrix(words: &[String], table: &EmbeddingTable) -> Result<Vec<Vec<f64>>, DatError> {
    if words.len() < 2 {
        return Err(DatError::TooFewWords(words.len()));
    }
    let vectors = resolve_vectors(words, table)?;
    let n = vectors.len();
    let mut matrix = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in (i + 1)..n {
            // stored vectors are dimension-checked and nonzero by construction
            let d = cosine_distance(vectors[i], vectors[j]).expect("table vectors are valid");
            matrix[i][j] = d;
            matrix[j][i] = d;
        }
    }
    Ok(matrix)
}

/// Score a list of ≥2 distinct resolvable words.
pub fn dat_score(
    words: &[String],
    table: &EmbeddingTable,
    freq: &FrequencyTable,
) -> Result<DatResult, DatError> {
    let matrix = distance_matrix(words, table)?;
    let n = words.len();
    let mut sum = 0.0f64;
    for (i, row) in matrix.iter().enumerate() {
        for d in &row[(i + 1)..] {
            sum += d;
        }
    }
    // sum over unordered pairs, doubled for the ordered-pair normalization
    let score = 100.0 * 2.0 * sum / (n as f64 * (n as f64 - 1.0));
    let mean_surprisal = words.iter().map(|w| surprisal(w, freq)).sum::<f64>() / n as f64;
    Ok(DatResult {
        score,
        n,
        words: words.to_vec(),
        matrix,
        mean_surprisal,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lexicon::NounLexicon;

    fn words(list: &[&str]) -> Vec<String> {
        list.iter().map(|w| w.to_string()).collect()
    }

    fn orthogonal_table() -> EmbeddingTable {
        let names = ["cat", "galaxy", "vinegar", "trumpet", "glacier", "sadness", "carpet"];
        EmbeddingTable::from_pairs(
            7,
            names.iter().enumerate().map(|(i, w)| {
                let mut v = vec![0.0; 7];
                v[i] = 1.0;
                (w.to_string(), v)
            }),
        )
        .unwrap()
    }

    fn unit_freq() -> FrequencyTable {
        FrequencyTable::from_counts([("cat", 1u64)]).unwrap()
    }

    #[test]
    fn orthogonal_words_score_100() {
        let table = orthogonal_table();
        let list = words(&["cat", "galaxy", "vinegar", "trumpet", "glacier", "sadness", "carpet"]);
        let result = dat_score(&list, &table, &unit_freq()).unwrap();
        assert!((result.score - 100.0).abs() < 1e-9);
        assert_eq!(result.n, 7);
    }

    #[test]
    fn identical_vectors_score_0() {
        let table =
            EmbeddingTable::from_pairs(2, [("a", vec![3.0, 4.0]), ("b", vec![6.0, 8.0])]).unwrap();
        let result = dat_score(&words(&["a", "b"]), &table, &unit_freq()).unwrap();
        assert!(result.score.abs() < 1e-12);
    }

    #[test]
    fn matrix_for_orthogonal_pair() {
        let table =
            EmbeddingTable::from_pairs(2, [("a", vec![1.0, 0.0]), ("b", vec![0.0, 1.0])]).unwrap();
        let matrix = distance_matrix(&words(&["a", "b"]), &table).unwrap();
        assert_eq!(matrix, vec![vec![0.0, 1.0], vec![1.0, 0.0]]);
    }

    #[test]
    fn score_is_100_times_mean_off_diagonal() {
        let table = orthogonal_table();
        let list = words(&["cat", "galaxy", "vinegar", "trumpet"]);
        let result = dat_score(&list, &table, &unit_freq()).unwrap();
        let n = result.n;
        let mut acc = 0.0;
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    acc += result.matrix[i][j];
                }
            }
        }
        let mean = acc / (n * (n - 1)) as f64;
        assert!((result.score - 100.0 * mean).abs() < 1e-9);
    }

    #[test]
    fn rejects_unknown_and_short_input() {
        let table = orthogonal_table();
        assert!(matches!(
            dat_score(&words(&["cat", "qwxzt"]), &table, &unit_freq()),
            Err(DatError::UnknownWord(w)) if w == "qwxzt"
        ));
        assert!(matches!(
            dat_score(&words(&["cat"]), &table, &unit_freq()),
            Err(DatError::TooFewWords(1))
        ));
    }

    #[test]
    fn mean_surprisal_over_scored_words() {
        let table =
            EmbeddingTable::from_pairs(2, [("cat", vec![1.0, 0.0]), ("dog", vec![0.0, 1.0])])
                .unwrap();
        let freq = FrequencyTable::from_counts([("cat", 90u64), ("dog", 9), ("the", 900)]).unwrap();
        let result = dat_score(&words(&["cat", "dog"]), &table, &freq).unwrap();
        let expected = (surprisal("cat", &freq) + surprisal("dog", &freq)) / 2.0;
        assert!((result.mean_surprisal - expected).abs() < 1e-12);
    }

    fn selection_fixture() -> (NounLexicon, EmbeddingTable) {
        let lexicon = NounLexicon::from_words([
            "cat", "dog", "galaxy", "vinegar", "trumpet", "glacier", "sadness", "carpet",
            "apple", "zephyr", "ice cream",
        ])
        .unwrap();
        let mut pairs: Vec<(String, Vec<f64>)> = ["cat", "dog", "galaxy", "vinegar", "trumpet", "glacier", "sadness", "carpet", "apple"]
            .iter()
            .enumerate()
            .map(|(i, w)| {
                let mut v = vec![0.0; 9];
                v[i] = 1.0;
                (w.to_string(), v)
            })
            .collect();
        let mut ice = vec![0.0; 9];
        ice[0] = 0.5;
        ice[1] = 0.5;
        pairs.push(("ice-cream".to_string(), ice));
        let table = EmbeddingTable::from_pairs(9, pairs).unwrap();
        (lexicon, table)
    }

    #[test]
    fn selection_stops_at_k() {
        let (lexicon, table) = selection_fixture();
        let raw = words(&[
            "cat", "dog", "galaxy", "vinegar", "trumpet", "glacier", "sadness", "carpet", "apple",
        ]);
        let answer = select_valid_words(&raw, &lexicon, &table, 7);
        assert_eq!(answer.valid_words.len(), 7);
        assert_eq!(answer.valid_words, words(&["cat", "dog", "galaxy", "vinegar", "trumpet", "glacier", "sadness"]));
        // words past the seventh acceptance are never examined
        assert!(answer.rejected.is_empty());
        assert_eq!(answer.raw_words.len(), 9);
    }

    #[test]
    fn selection_rejects_with_reasons() {
        let (lexicon, table) = selection_fixture();
        let raw = words(&["run", "dog", "dog", "---", "zephyr", "ice cream", "cat"]);
        let answer = select_valid_words(&raw, &lexicon, &table, 7);
        assert_eq!(answer.valid_words, words(&["dog", "ice cream", "cat"]));
        assert_eq!(
            answer.rejected,
            vec![
                Rejection { word: "run".into(), reason: RejectReason::NotInLexicon },
                Rejection { word: "dog".into(), reason: RejectReason::Duplicate },
                Rejection { word: "---".into(), reason: RejectReason::Empty },
                Rejection { word: "zephyr".into(), reason: RejectReason::NoEmbedding },
            ]
        );
    }

    #[test]
    fn plural_duplicates_collapse_to_one_lemma() {
        let (lexicon, table) = selection_fixture();
        let raw = words(&["apple", "Apples"]);
        let answer = select_valid_words(&raw, &lexicon, &table, 7);
        assert_eq!(answer.valid_words, words(&["apple"]));
        assert_eq!(answer.rejected[0].reason, RejectReason::Duplicate);
    }

    #[test]
    fn dedup_can_be_disabled_for_sensitivity_checks() {
        let (lexicon, table) = selection_fixture();
        let raw = words(&["dog", "dog", "cat"]);
        let answer = select_valid_words_with(
            &raw,
            &lexicon,
            &table,
            SelectOptions { scoring_count: 7, dedup: false },
        );
        assert_eq!(answer.valid_words, words(&["dog", "dog", "cat"]));
    }

    #[test]
    fn short_answers_keep_what_they_have() {
        let (lexicon, table) = selection_fixture();
        let raw = words(&["cat", "dog", "run", "jump", "galaxy"]);
        let answer = select_valid_words(&raw, &lexicon, &table, 7);
        assert_eq!(answer.valid_words.len(), 3);
    }

    #[test]
    fn datresult_serializes_with_matrix_field() {
        let table =
            EmbeddingTable::from_pairs(2, [("a", vec![1.0, 0.0]), ("b", vec![0.0, 1.0])]).unwrap();
        let result = dat_score(&words(&["a", "b"]), &table, &unit_freq()).unwrap();
        let json = serde_json::to_value(&result).unwrap();
        assert!(json.get("score").is_some());
        assert!(json.get("words").is_some());
        assert!(json.get("matrix").is_some());
        assert!(json.get("mean_surprisal").is_some());
        let back: DatResult = serde_json::from_value(json).unwrap();
        assert_eq!(back, result);
    }
}
