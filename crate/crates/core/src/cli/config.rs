use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Duration;

use serde::Deserialize;

use super::{CliError, DataArgs, EndpointArgs};
use crate::dat::{SelectOptions, DEFAULT_SCORING_COUNT};
use crate::embedding::EmbeddingTable;
use crate::harness::ModelEndpoint;
use crate::lexicon::{FrequencyTable, LexiconFormat, NounLexicon};

/// JSON config file: every field optional, flags and environment win.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub embeddings: Option<PathBuf>,
    pub max_words: Option<usize>,
    pub lexicon: Option<PathBuf>,
    pub lexicon_format: Option<LexiconFormat>,
    pub freq: Option<PathBuf>,
    pub human: Option<PathBuf>,
    pub human_score_col: Option<String>,
    pub human_surprisal_col: Option<String>,
    pub base_url: Option<String>,
    pub model: Option<String>,
    pub credential_env: Option<String>,
    pub timeout_secs: Option<u64>,
    pub max_retries: Option<u32>,
    pub backoff_ms: Option<u64>,
    pub parallelism: Option<usize>,
    pub p: Option<f64>,
    pub temperature: Option<f64>,
    pub out: Option<PathBuf>,
    pub scoring_count: Option<usize>,
    pub seed: Option<u64>,
    pub pilot: Option<usize>,
}

impl FileConfig {
    pub fn load(path: Option<&Path>) -> Result<Self, CliError> {
        let Some(path) = path else {
            return Ok(Self::default());
        };
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::config(format!("cannot read config {}: {e}", path.display())))?;
        serde_json::from_str(&text)
            .map_err(|e| CliError::config(format!("invalid config {}: {e}", path.display())))
    }
}

fn env_var(key: &str) -> Option<String> {
    std::env::var(format!("DATKIT_{key}")).ok().filter(|v| !v.is_empty())
}

fn env_parsed<T: FromStr>(key: &str) -> Result<Option<T>, CliError>
where
    T::Err: std::fmt::Display,
{
    match env_var(key) {
        None => Ok(None),
        Some(raw) => raw
            .parse::<T>()
            .map(Some)
            .map_err(|e| CliError::config(format!("bad DATKIT_{key} value {raw:?}: {e}"))),
    }
}

/// flags > environment > config file.
fn pick<T>(flag: Option<T>, env: Option<T>, file: Option<T>) -> Option<T> {
    flag.or(env).or(file)
}

/// Fully resolved settings for one invocation.
#[derive(Debug, Clone)]
pub struct AppConfig {
    pub embeddings: Option<PathBuf>,
    pub max_words: Option<usize>,
    pub lexicon: Option<PathBuf>,
    pub lexicon_format: LexiconFormat,
    pub freq: Option<PathBuf>,
    pub human: Option<PathBuf>,
    pub human_score_col: String,
    pub human_surprisal_col: Option<String>,
    pub base_url: Option<String>,
    pub model: Option<String>,
    pub credential_env: Option<String>,
    pub timeout: Duration,
    pub max_retries: u32,
    pub backoff: Duration,
    pub parallelism: usize,
    pub p: f64,
    pub temperature: f64,
    pub out: PathBuf,
    pub scoring_count: usize,
    pub seed: Option<u64>,
    pub pilot: usize,
}

impl AppConfig {
    pub fn resolve(
        data: &DataArgs,
        endpoint: &EndpointArgs,
        file: &FileConfig,
    ) -> Result<Self, CliError> {
        let credential_env = pick(
            endpoint.credential_env.clone(),
            env_var("CREDENTIAL_ENV"),
            file.credential_env.clone(),
        )
        .unwrap_or_else(|| "OPENAI_API_KEY".to_string());
        let credential_env = if credential_env.eq_ignore_ascii_case("none") {
            None
        } else {
            Some(credential_env)
        };
        let scoring_count = pick(
            data.scoring_count,
            env_parsed("SCORING_COUNT")?,
            file.scoring_count,
        )
        .unwrap_or(DEFAULT_SCORING_COUNT);
        if scoring_count < 2 {
            return Err(CliError::config(format!(
                "scoring count must be at least 2, got {scoring_count}"
            )));
        }
        Ok(Self {
            embeddings: pick(
                data.embeddings.clone(),
                env_var("EMBEDDINGS").map(PathBuf::from),
                file.embeddings.clone(),
            ),
            max_words: pick(data.max_words, env_parsed("MAX_WORDS")?, file.max_words),
            lexicon: pick(
                data.lexicon.clone(),
                env_var("LEXICON").map(PathBuf::from),
                file.lexicon.clone(),
            ),
            lexicon_format: pick(
                data.lexicon_format,
                env_parsed("LEXICON_FORMAT")?,
                file.lexicon_format,
            )
            .unwrap_or(LexiconFormat::WordNet),
            freq: pick(
                data.freq.clone(),
                env_var("FREQ").map(PathBuf::from),
                file.freq.clone(),
            ),
            human: pick(None, env_var("HUMAN").map(PathBuf::from), file.human.clone()),
            human_score_col: pick(None, env_var("HUMAN_SCORE_COL"), file.human_score_col.clone())
                .unwrap_or_else(|| "dat".to_string()),
            human_surprisal_col: pick(
                None,
                env_var("HUMAN_SURPRISAL_COL"),
                file.human_surprisal_col.clone(),
            ),
            base_url: pick(
                endpoint.base_url.clone(),
                env_var("BASE_URL"),
                file.base_url.clone(),
            ),
            model: pick(endpoint.model.clone(), env_var("MODEL"), file.model.clone()),
            credential_env,
            timeout: Duration::from_secs(
                pick(endpoint.timeout_secs, env_parsed("TIMEOUT_SECS")?, file.timeout_secs)
                    .unwrap_or(60),
            ),
            max_retries: pick(endpoint.max_retries, env_parsed("MAX_RETRIES")?, file.max_retries)
                .unwrap_or(3),
            backoff: Duration::from_millis(
                pick(endpoint.backoff_ms, env_parsed("BACKOFF_MS")?, file.backoff_ms)
                    .unwrap_or(500),
            ),
            parallelism: pick(endpoint.parallelism, env_parsed("PARALLELISM")?, file.parallelism)
                .unwrap_or(4)
                .max(1),
            p: pick(None, env_parsed("P")?, file.p).unwrap_or(0.9),
            temperature: pick(None, env_parsed("TEMPERATURE")?, file.temperature).unwrap_or(0.7),
            out: pick(None, env_var("OUT").map(PathBuf::from), file.out.clone())
                .unwrap_or_else(|| PathBuf::from("out")),
            scoring_count,
            seed: pick(None, env_parsed("SEED")?, file.seed),
            pilot: pick(None, env_parsed("PILOT")?, file.pilot).unwrap_or(20),
        })
    }

    pub fn select_options(&self, allow_duplicates: bool) -> SelectOptions {
        SelectOptions {
            scoring_count: self.scoring_count,
            dedup: !allow_duplicates,
        }
    }

    /// Build the endpoint; `base_url` and `model` must be configured.
    pub fn endpoint(&self) -> Result<ModelEndpoint, CliError> {
        let base_url = self
            .base_url
            .clone()
            .ok_or_else(|| CliError::config("no endpoint base URL configured (--base-url)"))?;
        let model = self
            .model
            .clone()
            .ok_or_else(|| CliError::config("no model configured (--model)"))?;
        let mut endpoint = ModelEndpoint::new(base_url, model);
        endpoint.credential_env = self.credential_env.clone();
        endpoint.timeout = self.timeout;
        endpoint.max_retries = self.max_retries;
        endpoint.backoff = self.backoff;
        Ok(endpoint)
    }
}

/// The three data files every scoring command needs.
pub struct DataBundle {
    pub table: EmbeddingTable,
    pub lexicon: NounLexicon,
    pub freq: FrequencyTable,
}

impl DataBundle {
    pub fn load(config: &AppConfig) -> Result<Self, CliError> {
        let embeddings = config
            .embeddings
            .as_ref()
            .ok_or_else(|| CliError::config("no embedding file configured (--embeddings)"))?;
        let lexicon_path = config
            .lexicon
            .as_ref()
            .ok_or_else(|| CliError::config("no lexicon file configured (--lexicon)"))?;
        let freq_path = config
            .freq
            .as_ref()
            .ok_or_else(|| CliError::config("no frequency file configured (--freq)"))?;
        let table = EmbeddingTable::load(embeddings, config.max_words)
            .map_err(|e| CliError::config(e.to_string()))?;
        let lexicon = NounLexicon::load(lexicon_path, config.lexicon_format)
            .map_err(|e| CliError::config(e.to_string()))?;
        let freq =
            FrequencyTable::load(freq_path).map_err(|e| CliError::config(e.to_string()))?;
        Ok(Self {
            table,
            lexicon,
            freq,
        })
    }
}
