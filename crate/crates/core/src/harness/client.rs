use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::{DecodingConfig, HarnessError};

/// Where and how to reach one OpenAI-compatible chat-completion endpoint.
#[derive(Debug, Clone)]
pub struct ModelEndpoint {
    /// Base URL without the `/chat/completions` suffix.
    pub base_url: String,
    pub model: String,
    /// Name of the environment variable holding the bearer token; `None`
    /// sends no Authorization header (local stubs and open gateways).
    pub credential_env: Option<String>,
    pub timeout: Duration,
    /// Extra attempts after the first, on transport errors and 429s.
    pub max_retries: u32,
    /// Initial backoff, doubled per retry.
    pub backoff: Duration,
}

impl ModelEndpoint {
    pub fn new(base_url: impl Into<String>, model: impl Into<String>) -> Self {
        Self {
            base_url: base_url.into(),
            model: model.into(),
            credential_env: Some("OPENAI_API_KEY".to_string()),
            timeout: Duration::from_secs(60),
            max_retries: 3,
            backoff: Duration::from_millis(500),
        }
    }

    pub fn chat_url(&self) -> String {
        format!("{}/chat/completions", self.base_url.trim_end_matches('/'))
    }

    fn bearer_token(&self) -> Result<Option<String>, HarnessError> {
        match &self.credential_env {
            None => Ok(None),
            Some(name) => std::env::var(name)
                .map(Some)
                .map_err(|_| HarnessError::Auth(name.clone())),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ChatMessage {
    pub role: String,
    pub content: String,
}

/// Wire body for one chat-completion request.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ChatRequest {
    pub model: String,
    pub messages: Vec<ChatMessage>,
    pub temperature: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub top_p: Option<f64>,
}

impl ChatRequest {
    /// Single user message, decoding config mapped onto API fields
    /// (greedy → temperature 0 and no nucleus parameter).
    pub fn build(model: &str, prompt: &str, config: &DecodingConfig) -> Self {
        Self {
            model: model.to_string(),
            messages: vec![ChatMessage {
                role: "user".to_string(),
                content: prompt.to_string(),
            }],
            temperature: config.effective_temperature(),
            top_p: config.effective_top_p(),
        }
    }
}

#[derive(Deserialize)]
struct ChatResponse {
    choices: Vec<ChatChoice>,
}

#[derive(Deserialize)]
struct ChatChoice {
    message: ChatResponseMessage,
}

#[derive(Deserialize)]
struct ChatResponseMessage {
    content: String,
}

/// One HTTP POST, no policy: the transport layer `query_model` retries over.
pub trait HttpBackend: Send + Sync {
    fn post_json(
        &self,
        url: &str,
        bearer: Option<&str>,
        body: &str,
        timeout: Duration,
    ) -> Result<(u16, String), TransportError>;
}

/// Transport-level failure, before any HTTP status exists.
#[derive(Debug, Clone)]
pub struct TransportError {
    pub message: String,
    pub timed_out: bool,
}

/// Blocking reqwest-based backend.
#[derive(Default)]
pub struct ReqwestBackend;

impl HttpBackend for ReqwestBackend {
    fn post_json(
        &self,
        url: &str,
        bearer: Option<&str>,
        body: &str,
        timeout: Duration,
    ) -> Result<(u16, String), TransportError> {
        let client = reqwest::blocking::Client::builder()
            .timeout(timeout)
            .build()
            .map_err(|e| TransportError {
                message: e.to_string(),
                timed_out: false,
            })?;
        let mut request = client
            .post(url)
            .header("Content-Type", "application/json")
            .body(body.to_string());
        if let Some(token) = bearer {
            request = request.header("Authorization", format!("Bearer {token}"));
        }
        let response = request.send().map_err(|e| TransportError {
            timed_out: e.is_timeout(),
            message: e.to_string(),
        })?;
        let status = response.status().as_u16();
        let text = response.text().map_err(|e| TransportError {
            timed_out: e.is_timeout(),
            message: e.to_string(),
        })?;
        Ok((status, text))
    }
}

/// Outcome of a successful query.
#[derive(Debug, Clone)]
pub struct QueryResult {
    /// Assistant text, verbatim.
    pub text: String,
    /// Attempts spent, including the successful one.
    pub attempts: u32,
}

/// Issue one chat completion through the default HTTP backend.
pub fn query_model(
    endpoint: &ModelEndpoint,
    prompt: &str,
    config: &DecodingConfig,
) -> Result<QueryResult, HarnessError> {
    query_model_with(&ReqwestBackend, endpoint, prompt, config)
}

/// Issue one chat completion, retrying transport failures and 429s with
/// exponential backoff up to `endpoint.max_retries` extra attempts.
pub fn query_model_with(
    backend: &dyn HttpBackend,
    endpoint: &ModelEndpoint,
    prompt: &str,
    config: &DecodingConfig,
) -> Result<QueryResult, HarnessError> {
    let bearer = endpoint.bearer_token()?;
    let request = ChatRequest::build(&endpoint.model, prompt, config);
    let body = serde_json::to_string(&request)
        .map_err(|e| HarnessError::MalformedResponse(format!("request encode: {e}")))?;
    let url = endpoint.chat_url();

    let mut attempts = 0u32;
    loop {
        attempts += 1;
        let outcome = backend.post_json(&url, bearer.as_deref(), &body, endpoint.timeout);
        let retryable: Option<Option<TransportError>> = match &outcome {
            Err(transport) => Some(Some(transport.clone())),
            Ok((429, _)) => Some(None),
            _ => None,
        };
        if let Some(transport) = retryable {
            if attempts <= endpoint.max_retries {
                let exp = attempts.saturating_sub(1).min(16);
                std::thread::sleep(endpoint.backoff * 2u32.pow(exp));
                continue;
            }
            return Err(match transport {
                Some(t) if t.timed_out => HarnessError::Timeout { attempts },
                Some(t) => HarnessError::Transport {
                    attempts,
                    message: t.message,
                },
                None => HarnessError::RateLimited { attempts },
            });
        }
        let (status, text) = outcome.expect("non-retryable outcome is a response");
        return match status {
            200..=299 => {
                let parsed: ChatResponse = serde_json::from_str(&text).map_err(|e| {
                    HarnessError::MalformedResponse(format!("{e} in body {}", snippet(&text)))
                })?;
                let content = parsed
                    .choices
                    .into_iter()
                    .next()
                    .map(|c| c.message.content)
                    .ok_or_else(|| HarnessError::MalformedResponse("empty choices".to_string()))?;
                Ok(QueryResult {
                    text: content,
                    attempts,
                })
            }
            401 | 403 => Err(HarnessError::Auth(format!(
                "endpoint rejected credentials (HTTP {status})"
            ))),
            _ => Err(HarnessError::Http {
                status,
                body: snippet(&text),
            }),
        };
    }
}

fn snippet(text: &str) -> String {
    const MAX: usize = 200;
    if text.len() <= MAX {
        text.to_string()
    } else {
        let mut end = MAX;
        while !text.is_char_boundary(end) {
            end -= 1;
        }
        format!("{}…", &text[..end])
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::sync::Mutex;

    /// Scripted backend: pops one canned reply per call, records bodies.
    pub(super) struct ScriptedBackend {
        pub replies: Mutex<Vec<Result<(u16, String), TransportError>>>,
        pub bodies: Mutex<Vec<String>>,
    }

    impl ScriptedBackend {
        pub fn new(replies: Vec<Result<(u16, String), TransportError>>) -> Self {
            Self {
                replies: Mutex::new(replies),
                bodies: Mutex::new(Vec::new()),
            }
        }
    }

    impl HttpBackend for ScriptedBackend {
        fn post_json(
            &self,
            _url: &str,
            _bearer: Option<&str>,
            body: &str,
            _timeout: Duration,
        ) -> Result<(u16, String), TransportError> {
            self.bodies.lock().unwrap().push(body.to_string());
            let mut replies = self.replies.lock().unwrap();
            if replies.is_empty() {
                panic!("scripted backend exhausted");
            }
            replies.remove(0)
        }
    }

    fn ok_reply(content: &str) -> Result<(u16, String), TransportError> {
        Ok((
            200,
            serde_json::json!({"choices": [{"message": {"role": "assistant", "content": content}}]})
                .to_string(),
        ))
    }

    fn fast_endpoint() -> ModelEndpoint {
        let mut endpoint = ModelEndpoint::new("http://stub.invalid/v1", "stub-model");
        endpoint.credential_env = None;
        endpoint.backoff = Duration::from_millis(1);
        endpoint
    }

    #[test]
    fn passthrough_of_fixed_text() {
        let backend = ScriptedBackend::new(vec![ok_reply("cat\ndog")]);
        let result =
            query_model_with(&backend, &fast_endpoint(), "p", &DecodingConfig::greedy()).unwrap();
        assert_eq!(result.text, "cat\ndog");
        assert_eq!(result.attempts, 1);
    }

    #[test]
    fn greedy_request_body_has_zero_temperature_and_no_nucleus() {
        let backend = ScriptedBackend::new(vec![ok_reply("x")]);
        query_model_with(&backend, &fast_endpoint(), "p", &DecodingConfig::greedy()).unwrap();
        let body = backend.bodies.lock().unwrap()[0].clone();
        let json: serde_json::Value = serde_json::from_str(&body).unwrap();
        assert_eq!(json["temperature"], 0.0);
        assert!(json.get("top_p").is_none());
        assert_eq!(json["messages"][0]["role"], "user");
        assert_eq!(json["messages"].as_array().unwrap().len(), 1);
    }

    #[test]
    fn top_p_request_body_carries_both_parameters() {
        let backend = ScriptedBackend::new(vec![ok_reply("x")]);
        let cfg = DecodingConfig::top_p(0.9, 0.7).unwrap();
        query_model_with(&backend, &fast_endpoint(), "p", &cfg).unwrap();
        let body = backend.bodies.lock().unwrap()[0].clone();
        let json: serde_json::Value = serde_json::from_str(&body).unwrap();
        assert_eq!(json["temperature"], 0.7);
        assert_eq!(json["top_p"], 0.9);
    }

    #[test]
    fn retries_429_then_succeeds() {
        let backend = ScriptedBackend::new(vec![
            Ok((429, "slow down".to_string())),
            Ok((429, "slow down".to_string())),
            ok_reply("fine"),
        ]);
        let result =
            query_model_with(&backend, &fast_endpoint(), "p", &DecodingConfig::greedy()).unwrap();
        assert_eq!(result.text, "fine");
        assert_eq!(result.attempts, 3);
    }

    #[test]
    fn rate_limited_after_exhausting_retries() {
        let mut endpoint = fast_endpoint();
        endpoint.max_retries = 2;
        let backend = ScriptedBackend::new(vec![
            Ok((429, String::new())),
            Ok((429, String::new())),
            Ok((429, String::new())),
        ]);
        let err =
            query_model_with(&backend, &endpoint, "p", &DecodingConfig::greedy()).unwrap_err();
        assert!(matches!(err, HarnessError::RateLimited { attempts: 3 }));
    }

    #[test]
    fn transport_errors_retry_then_surface() {
        let mut endpoint = fast_endpoint();
        endpoint.max_retries = 1;
        let transport = TransportError {
            message: "connection refused".to_string(),
            timed_out: false,
        };
        let backend =
            ScriptedBackend::new(vec![Err(transport.clone()), Err(transport)]);
        let err =
            query_model_with(&backend, &endpoint, "p", &DecodingConfig::greedy()).unwrap_err();
        assert!(matches!(err, HarnessError::Transport { attempts: 2, .. }));
    }

    #[test]
    fn timeout_is_distinguished() {
        let mut endpoint = fast_endpoint();
        endpoint.max_retries = 0;
        let backend = ScriptedBackend::new(vec![Err(TransportError {
            message: "deadline".to_string(),
            timed_out: true,
        })]);
        let err =
            query_model_with(&backend, &endpoint, "p", &DecodingConfig::greedy()).unwrap_err();
        assert!(matches!(err, HarnessError::Timeout { attempts: 1 }));
    }

    #[test]
    fn auth_errors_do_not_retry() {
        let backend = ScriptedBackend::new(vec![Ok((401, "no".to_string()))]);
        let err = query_model_with(&backend, &fast_endpoint(), "p", &DecodingConfig::greedy())
            .unwrap_err();
        assert!(matches!(err, HarnessError::Auth(_)));
        assert_eq!(backend.bodies.lock().unwrap().len(), 1);
    }

    #[test]
    fn missing_credential_env_is_auth_error() {
        let mut endpoint = fast_endpoint();
        endpoint.credential_env = Some("DATKIT_TEST_MISSING_CREDENTIAL".to_string());
        let backend = ScriptedBackend::new(vec![]);
        let err = query_model_with(&backend, &endpoint, "p", &DecodingConfig::greedy())
            .unwrap_err();
        assert!(matches!(err, HarnessError::Auth(name) if name.contains("DATKIT_TEST_MISSING")));
    }

    #[test]
    fn malformed_body_is_reported() {
        let backend = ScriptedBackend::new(vec![Ok((200, "not json".to_string()))]);
        let err = query_model_with(&backend, &fast_endpoint(), "p", &DecodingConfig::greedy())
            .unwrap_err();
        assert!(matches!(err, HarnessError::MalformedResponse(_)));
    }
}
