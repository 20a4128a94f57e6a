//! Minimal blocking chat-completion client.
//!
//! Every network-facing role in the engine — traversal agent, answer
//! generator, judge, and dataset generator — goes through this one client;
//! they differ only in endpoint config, prompt, and decode parameters. The
//! wire shape is the widely deployed chat-completions API: POST
//! `{base_url}/chat/completions` with `{model, messages, temperature, top_p,
//! max_tokens}`, first choice's message content comes back as the response
//! text.
//!
//! Transient failures (transport errors, 5xx) are retried with exponential
//! backoff; 4xx responses are permanent and never retried. A per-endpoint
//! semaphore caps in-flight requests so concurrent callers cannot stampede
//! a local server.

use crate::sync::Semaphore;
use serde::{Deserialize, Serialize};
use std::sync::Arc;
use std::time::{Duration, Instant};

#[derive(Debug, thiserror::Error)]
pub enum LlmError {
    #[error("credential environment variable {var} is not set")]
    MissingCredential { var: String },
    #[error("endpoint returned status {status}: {body}")]
    Status { status: u16, body: String },
    #[error("transport failure talking to {url}: {source}")]
    Transport {
        url: String,
        #[source]
        source: reqwest::Error,
    },
    #[error("malformed response body: {reason}")]
    Protocol { reason: String },
}

impl LlmError {
    /// Transient errors are worth retrying; 4xx and malformed bodies are not.
    pub fn is_transient(&self) -> bool {
        match self {
            LlmError::Status { status, .. } => *status >= 500,
            LlmError::Transport { .. } => true,
            _ => false,
        }
    }
}

/// Where and how to reach one chat or embeddings endpoint.
///
/// `api_key_env` names an environment variable holding the bearer token;
/// `None` sends no auth header (local stubs and unauthenticated servers).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EndpointConfig {
    pub base_url: String,
    pub model: String,
    #[serde(default)]
    pub api_key_env: Option<String>,
    #[serde(default = "default_timeout_secs")]
    pub timeout_secs: u64,
    /// Retries after the first attempt; 3 means up to 4 attempts total.
    #[serde(default = "default_max_retries")]
    pub max_retries: u32,
    #[serde(default = "default_backoff_ms")]
    pub backoff_base_ms: u64,
    #[serde(default = "default_max_in_flight")]
    pub max_in_flight: usize,
}

fn default_timeout_secs() -> u64 {
    60
}
fn default_max_retries() -> u32 {
    3
}
fn default_backoff_ms() -> u64 {
    500
}
fn default_max_in_flight() -> usize {
    4
}

impl EndpointConfig {
    pub fn new(base_url: impl Into<String>, model: impl Into<String>) -> Self {
        EndpointConfig {
            base_url: base_url.into(),
            model: model.into(),
            api_key_env: None,
            timeout_secs: default_timeout_secs(),
            max_retries: default_max_retries(),
            backoff_base_ms: default_backoff_ms(),
            max_in_flight: default_max_in_flight(),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ChatMessage {
    pub role: String,
    pub content: String,
}

impl ChatMessage {
    pub fn system(content: impl Into<String>) -> Self {
        ChatMessage {
            role: "system".into(),
            content: content.into(),
        }
    }
    pub fn user(content: impl Into<String>) -> Self {
        ChatMessage {
            role: "user".into(),
            content: content.into(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct ChatRequest {
    pub messages: Vec<ChatMessage>,
    pub temperature: f64,
    pub top_p: f64,
    pub max_tokens: u32,
}

impl ChatRequest {
    /// Decode parameters used by the traversal agent.
    pub fn for_traversal(messages: Vec<ChatMessage>) -> Self {
        ChatRequest {
            messages,
            temperature: 0.6,
            top_p: 0.85,
            max_tokens: 50,
        }
    }
}

#[derive(Debug, Clone)]
pub struct ChatResponse {
    pub text: String,
    pub prompt_tokens: Option<u64>,
    pub completion_tokens: Option<u64>,
    pub latency: Duration,
}

#[derive(Serialize)]
struct ChatWireRequest<'a> {
    model: &'a str,
    messages: &'a [ChatMessage],
    temperature: f64,
    top_p: f64,
    max_tokens: u32,
}

#[derive(Deserialize)]
struct ChatWireResponse {
    choices: Vec<ChatWireChoice>,
    #[serde(default)]
    usage: Option<WireUsage>,
}

#[derive(Deserialize)]
struct ChatWireChoice {
    message: ChatWireMessage,
}

#[derive(Deserialize)]
struct ChatWireMessage {
    content: String,
}

#[derive(Deserialize)]
struct WireUsage {
    #[serde(default)]
    prompt_tokens: Option<u64>,
    #[serde(default)]
    completion_tokens: Option<u64>,
}

#[derive(Serialize)]
struct EmbedWireRequest<'a> {
    model: &'a str,
    input: &'a [String],
}

#[derive(Deserialize)]
struct EmbedWireResponse {
    data: Vec<EmbedWireItem>,
}

#[derive(Deserialize)]
struct EmbedWireItem {
    index: usize,
    embedding: Vec<f32>,
}

/// Shared retry/auth/concurrency plumbing under both the chat client and the
/// remote embedder.
pub(crate) struct HttpEndpoint {
    config: EndpointConfig,
    http: reqwest::blocking::Client,
    in_flight: Semaphore,
}

impl HttpEndpoint {
    pub(crate) fn new(config: EndpointConfig) -> Result<Self, LlmError> {
        let http = reqwest::blocking::Client::builder()
            .timeout(Duration::from_secs(config.timeout_secs))
            .build()
            .map_err(|source| LlmError::Transport {
                url: config.base_url.clone(),
                source,
            })?;
        let in_flight = Semaphore::new(config.max_in_flight.max(1));
        Ok(HttpEndpoint {
            config,
            http,
            in_flight,
        })
    }

    pub(crate) fn config(&self) -> &EndpointConfig {
        &self.config
    }

    fn bearer(&self) -> Result<Option<String>, LlmError> {
        match &self.config.api_key_env {
            None => Ok(None),
            Some(var) => match std::env::var(var) {
                Ok(key) => Ok(Some(key)),
                Err(_) => Err(LlmError::MissingCredential { var: var.clone() }),
            },
        }
    }

    /// POSTs `body` to `{base_url}{path}`, retrying transient failures with
    /// exponential backoff. Returns the raw response body.
    fn post_json<B: Serialize>(&self, path: &str, body: &B) -> Result<String, LlmError> {
        let url = format!("{}{}", self.config.base_url.trim_end_matches('/'), path);
        let bearer = self.bearer()?;
        let mut attempt = 0u32;
        loop {
            attempt += 1;
            let result = self.post_once(&url, body, bearer.as_deref());
            match result {
                Ok(text) => return Ok(text),
                Err(err) if err.is_transient() && attempt <= self.config.max_retries => {
                    let backoff = self.config.backoff_base_ms << (attempt - 1).min(6);
                    std::thread::sleep(Duration::from_millis(backoff));
                }
                Err(err) => return Err(err),
            }
        }
    }

    fn post_once<B: Serialize>(
        &self,
        url: &str,
        body: &B,
        bearer: Option<&str>,
    ) -> Result<String, LlmError> {
        let _permit = self.in_flight.acquire();
        let mut request = self.http.post(url).json(body);
        if let Some(key) = bearer {
            request = request.bearer_auth(key);
        }
        let response = request.send().map_err(|source| LlmError::Transport {
            url: url.to_string(),
            source,
        })?;
        let status = response.status();
        let text = response.text().map_err(|source| LlmError::Transport {
            url: url.to_string(),
            source,
        })?;
        if !status.is_success() {
            return Err(LlmError::Status {
                status: status.as_u16(),
                body: text.chars().take(300).collect(),
            });
        }
        Ok(text)
    }

    pub(crate) fn embed_batch(&self, texts: &[String]) -> Result<Vec<Vec<f32>>, LlmError> {
        let wire = EmbedWireRequest {
            model: &self.config.model,
            input: texts,
        };
        let body = self.post_json("/embeddings", &wire)?;
        let parsed: EmbedWireResponse =
            serde_json::from_str(&body).map_err(|e| LlmError::Protocol {
                reason: format!("embeddings response: {e}"),
            })?;
        if parsed.data.len() != texts.len() {
            return Err(LlmError::Protocol {
                reason: format!(
                    "embeddings response has {} vectors for {} inputs",
                    parsed.data.len(),
                    texts.len()
                ),
            });
        }
        // Restore input order from the per-item index.
        let mut out: Vec<Option<Vec<f32>>> = vec![None; texts.len()];
        for item in parsed.data {
            let slot = out.get_mut(item.index).ok_or_else(|| LlmError::Protocol {
                reason: format!("embeddings response index {} out of range", item.index),
            })?;
            if slot.replace(item.embedding).is_some() {
                return Err(LlmError::Protocol {
                    reason: format!("embeddings response repeats index {}", item.index),
                });
            }
        }
        Ok(out.into_iter().map(|v| v.unwrap()).collect())
    }
}

/// Chat-completion client for one endpoint; cheap to share across threads.
pub struct ChatClient {
    endpoint: Arc<HttpEndpoint>,
}

impl ChatClient {
    pub fn new(config: EndpointConfig) -> Result<Self, LlmError> {
        Ok(ChatClient {
            endpoint: Arc::new(HttpEndpoint::new(config)?),
        })
    }

    pub fn config(&self) -> &EndpointConfig {
        self.endpoint.config()
    }

    /// Sends one chat request and returns the first completion.
    pub fn complete(&self, request: &ChatRequest) -> Result<ChatResponse, LlmError> {
        assert!(
            request.messages.iter().any(|m| m.role == "user"),
            "chat request needs at least one user message"
        );
        let start = Instant::now();
        let wire = ChatWireRequest {
            model: &self.endpoint.config().model,
            messages: &request.messages,
            temperature: request.temperature,
            top_p: request.top_p,
            max_tokens: request.max_tokens,
        };
        let body = self.endpoint.post_json("/chat/completions", &wire)?;
        let parsed: ChatWireResponse =
            serde_json::from_str(&body).map_err(|e| LlmError::Protocol {
                reason: format!("chat response: {e}"),
            })?;
        let choice = parsed.choices.into_iter().next().ok_or(LlmError::Protocol {
            reason: "chat response has no choices".into(),
        })?;
        let usage = parsed.usage.unwrap_or(WireUsage {
            prompt_tokens: None,
            completion_tokens: None,
        });
        Ok(ChatResponse {
            text: choice.message.content,
            prompt_tokens: usage.prompt_tokens,
            completion_tokens: usage.completion_tokens,
            latency: start.elapsed(),
        })
    }
}

impl Clone for ChatClient {
    fn clone(&self) -> Self {
        ChatClient {
            endpoint: Arc::clone(&self.endpoint),
        }
    }
}
