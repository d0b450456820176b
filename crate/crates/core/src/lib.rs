//! Divergent-association scoring for text generators.
//!
//! The library measures how semantically spread out a list of nouns is:
//! word vectors come from a GloVe-style text file, validity comes from a
//! noun lexicon, and the headline score is 100 times the average pairwise
//! cosine distance over the first seven valid words of an answer. On top
//! of the metric sit an evaluation harness for OpenAI-compatible chat
//! endpoints (prompt conditions, decoding configs, retries, sample logs)
//! and the statistics used to compare runs against human and random
//! baselines (percentiles, regressions, surprisal control).

pub mod cli;
pub mod dat;
pub mod embedding;
pub mod harness;
pub mod lexicon;
pub mod stats;

pub use dat::{dat_score, distance_matrix, select_valid_words, Answer, DatResult};
pub use embedding::{cosine_distance, EmbeddingTable};
pub use harness::{
    build_prompt, converged_sample_size, parse_word_list, DecodingConfig, ModelEndpoint,
    PromptCondition, Sample,
};
pub use lexicon::{is_valid_word, normalize, surprisal, FrequencyTable, NounLexicon};
pub use stats::{linear_fit, percentile, surprisal_control, HumanDataset, RunReport};
