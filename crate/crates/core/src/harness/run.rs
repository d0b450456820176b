use std::collections::BTreeMap;
use std::io::Write;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::mpsc;
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};

use crate::dat::{dat_score, select_valid_words_with, Answer, DatResult, SelectOptions};
use crate::embedding::EmbeddingTable;
use crate::harness::client::{query_model_with, HttpBackend, ModelEndpoint};
use crate::harness::decoding::DecodingConfig;
use crate::harness::parse::parse_word_list;
use crate::harness::prompt::{PromptCondition, PromptTemplates};
use crate::harness::HarnessError;
use crate::lexicon::{FrequencyTable, NounLexicon};

/// Record of one trial: full provenance, enough to rescore offline.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Sample {
    /// Request index within the run; the log is written in `seq` order.
    pub seq: usize,
    pub model_id: String,
    pub condition: PromptCondition,
    pub config: DecodingConfig,
    /// Assistant text verbatim; empty when the request failed outright.
    pub raw_text: String,
    pub answer: Answer,
    /// Present iff the answer reached the scoring count.
    pub dat: Option<DatResult>,
    pub timestamp_ms: u64,
    pub attempt_count: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

/// Everything needed to turn raw reply text into a scored answer.
#[derive(Clone, Copy)]
pub struct ScoringContext<'a> {
    pub lexicon: &'a NounLexicon,
    pub table: &'a EmbeddingTable,
    pub freq: &'a FrequencyTable,
    pub options: SelectOptions,
}

impl ScoringContext<'_> {
    /// Parse, validate, and (when enough words survive) score one reply.
    pub fn score_reply(&self, raw_text: &str) -> (Answer, Option<DatResult>) {
        let candidates = parse_word_list(raw_text);
        let answer = select_valid_words_with(&candidates, self.lexicon, self.table, self.options);
        let dat = if answer.valid_words.len() >= self.options.scoring_count {
            dat_score(&answer.valid_words, self.table, self.freq).ok()
        } else {
            None
        };
        (answer, dat)
    }
}

/// Result of a full collection run.
#[derive(Debug)]
pub struct RunOutcome {
    /// All samples in `seq` order, failures included.
    pub samples: Vec<Sample>,
    /// Samples without a [`DatResult`] over total requested.
    pub invalid_answer_rate: f64,
    /// Requests that failed at the transport/API level.
    pub failed_requests: usize,
}

impl RunOutcome {
    /// Scores of the successfully scored samples, in `seq` order.
    pub fn scores(&self) -> Vec<f64> {
        self.samples
            .iter()
            .filter_map(|s| s.dat.as_ref().map(|d| d.score))
            .collect()
    }
}

fn now_ms() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_millis() as u64)
        .unwrap_or(0)
}

/// Shape of one collection run.
#[derive(Debug, Clone, Copy)]
pub struct CollectOptions {
    pub condition: PromptCondition,
    pub config: DecodingConfig,
    /// Requests to issue.
    pub n: usize,
    /// Upper bound on in-flight requests.
    pub parallelism: usize,
    /// First sequence number; lets a pilot and its extension share a log.
    pub seq_base: usize,
}

impl CollectOptions {
    pub fn new(condition: PromptCondition, config: DecodingConfig, n: usize) -> Self {
        Self {
            condition,
            config,
            n,
            parallelism: 4,
            seq_base: 0,
        }
    }
}

/// Run `n` query/parse/validate/score cycles with at most `parallelism`
/// requests in flight.
///
/// Samples are appended to `log` as JSON Lines strictly in `seq` order, so
/// identical runs produce identical logs (timestamps aside) regardless of
/// completion order. Failed requests are recorded as samples with an
/// `error`; the run itself only errors when every request failed, and the
/// partial log survives either way.
pub fn collect_samples(
    backend: &dyn HttpBackend,
    endpoint: &ModelEndpoint,
    options: &CollectOptions,
    ctx: &ScoringContext<'_>,
    templates: &PromptTemplates,
    mut log: Option<&mut dyn Write>,
) -> Result<RunOutcome, HarnessError> {
    let n = options.n;
    let condition = options.condition;
    let config = options.config;
    let prompt = templates.render(condition);
    let workers = options.parallelism.max(1).min(n.max(1));
    let next = AtomicUsize::new(0);
    let (tx, rx) = mpsc::channel::<(usize, Sample)>();

    std::thread::scope(|scope| {
        for _ in 0..workers {
            let tx = tx.clone();
            let next = &next;
            let prompt = &prompt;
            scope.spawn(move || loop {
                let index = next.fetch_add(1, Ordering::Relaxed);
                if index >= n {
                    break;
                }
                let seq = options.seq_base + index;
                let sample = run_cycle(backend, endpoint, condition, &config, seq, prompt, ctx);
                if tx.send((index, sample)).is_err() {
                    break;
                }
            });
        }
        drop(tx);

        // Reorder completions so the log is written in seq order.
        let mut pending: BTreeMap<usize, Sample> = BTreeMap::new();
        let mut samples: Vec<Sample> = Vec::with_capacity(n);
        let mut write_error: Option<std::io::Error> = None;
        for (index, sample) in rx {
            pending.insert(index, sample);
            while let Some(sample) = pending.remove(&samples.len()) {
                if let (Some(log), None) = (log.as_deref_mut(), write_error.as_ref()) {
                    let line = serde_json::to_string(&sample).expect("sample serializes");
                    if let Err(e) = writeln!(log, "{line}") {
                        write_error = Some(e);
                    }
                }
                samples.push(sample);
            }
        }
        if let Some(e) = write_error {
            return Err(HarnessError::Transport {
                attempts: 0,
                message: format!("sample log write failed: {e}"),
            });
        }

        let failed_requests = samples.iter().filter(|s| s.error.is_some()).count();
        let invalid = samples.iter().filter(|s| s.dat.is_none()).count();
        if n > 0 && failed_requests == n {
            return Err(HarnessError::AllRequestsFailed(n));
        }
        Ok(RunOutcome {
            invalid_answer_rate: if n == 0 { 0.0 } else { invalid as f64 / n as f64 },
            samples,
            failed_requests,
        })
    })
}

fn run_cycle(
    backend: &dyn HttpBackend,
    endpoint: &ModelEndpoint,
    condition: PromptCondition,
    config: &DecodingConfig,
    seq: usize,
    prompt: &str,
    ctx: &ScoringContext<'_>,
) -> Sample {
    match query_model_with(backend, endpoint, prompt, config) {
        Ok(result) => {
            let (answer, dat) = ctx.score_reply(&result.text);
            Sample {
                seq,
                model_id: endpoint.model.clone(),
                condition,
                config: *config,
                raw_text: result.text,
                answer,
                dat,
                timestamp_ms: now_ms(),
                attempt_count: result.attempts,
                error: None,
            }
        }
        Err(err) => {
            let attempts = match &err {
                HarnessError::Timeout { attempts }
                | HarnessError::RateLimited { attempts }
                | HarnessError::Transport { attempts, .. } => *attempts,
                _ => 1,
            };
            Sample {
                seq,
                model_id: endpoint.model.clone(),
                condition,
                config: *config,
                raw_text: String::new(),
                answer: Answer::default(),
                dat: None,
                timestamp_ms: now_ms(),
                attempt_count: attempts,
                error: Some(err.to_string()),
            }
        }
    }
}

/// Parse a JSON Lines sample log back into memory.
pub fn read_sample_log(path: impl AsRef<std::path::Path>) -> std::io::Result<Vec<Sample>> {
    let contents = std::fs::read_to_string(path)?;
    contents
        .lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| {
            serde_json::from_str(l)
                .map_err(|e| std::io::Error::new(std::io::ErrorKind::InvalidData, e))
        })
        .collect()
}
