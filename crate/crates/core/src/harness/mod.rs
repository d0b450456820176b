//! Driving chat-completion endpoints through the three prompt conditions.
//!
//! The harness builds prompts, maps decoding configs onto OpenAI-compatible
//! request fields, retries transient failures with exponential backoff,
//! parses free-text replies into candidate word lists, and records every
//! trial as a [`Sample`] in an append-only JSON Lines log.

mod client;
mod decoding;
mod parse;
mod prompt;
mod run;
mod sample_size;

pub use client::{query_model, query_model_with, ChatRequest, HttpBackend, ModelEndpoint, QueryResult, ReqwestBackend};
pub use decoding::{DecodingConfig, Strategy};
pub use parse::parse_word_list;
pub use prompt::{build_prompt, PromptCondition, PromptTemplates, DAT_PROMPT_V1};
pub use run::{collect_samples, read_sample_log, CollectOptions, RunOutcome, Sample, ScoringContext};
pub use sample_size::{converged_sample_size, DEFAULT_ALPHA, DEFAULT_EPSILON};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("credential environment variable {0} is not set")]
    Auth(String),
    #[error("request timed out after {attempts} attempt(s)")]
    Timeout { attempts: u32 },
    #[error("rate limited after {attempts} attempt(s)")]
    RateLimited { attempts: u32 },
    #[error("malformed response: {0}")]
    MalformedResponse(String),
    #[error("transport failure after {attempts} attempt(s): {message}")]
    Transport { attempts: u32, message: String },
    #[error("endpoint returned HTTP {status}: {body}")]
    Http { status: u16, body: String },
    #[error("invalid decoding config: {0}")]
    InvalidConfig(String),
    #[error("alpha must be in (0, 1), got {0}")]
    InvalidAlpha(f64),
    #[error("epsilon must be positive, got {0}")]
    InvalidEpsilon(f64),
    #[error("sigma must be nonnegative, got {0}")]
    InvalidSigma(f64),
    #[error("all {0} requests failed")]
    AllRequestsFailed(usize),
}
