use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::json;

use super::{CompletionRequest, GatewayError, ModelBackend};

pub const ENDPOINT_ENV: &str = "GATEWAY_ENDPOINT";
pub const TOKEN_ENV: &str = "GATEWAY_TOKEN";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RemoteConfig {
    /// Full chat-completions URL.
    pub endpoint: String,
    #[serde(skip_serializing)]
    pub token: Option<String>,
    pub model: String,
    pub timeout_secs: u64,
    pub max_retries: u32,
    pub backoff_ms: u64,
    pub max_backoff_ms: u64,
}

impl Default for RemoteConfig {
    fn default() -> Self {
        Self {
            endpoint: String::new(),
            token: None,
            model: String::new(),
            timeout_secs: 120,
            max_retries: 3,
            backoff_ms: 250,
            max_backoff_ms: 8000,
        }
    }
}

impl RemoteConfig {
    /// Environment variables override endpoint and token only.
    pub fn with_env(mut self) -> Self {
        if let Ok(endpoint) = std::env::var(ENDPOINT_ENV) {
            self.endpoint = endpoint;
        }
        if let Ok(token) = std::env::var(TOKEN_ENV) {
            self.token = Some(token);
        }
        self
    }
}

/// Chat-completion client with bounded exponential backoff on transport
/// errors, 429 and 5xx responses. Malformed bodies are not retried.
pub struct RemoteBackend {
    config: RemoteConfig,
    client: reqwest::blocking::Client,
}

impl std::fmt::Debug for RemoteBackend {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("RemoteBackend").field("endpoint", &self.config.endpoint).finish()
    }
}

#[derive(Deserialize)]
struct ChatResponse {
    choices: Vec<Choice>,
}

#[derive(Deserialize)]
struct Choice {
    message: Message,
}

#[derive(Deserialize)]
struct Message {
    content: String,
}

enum Attempt {
    Retry(String),
    Fatal(String),
}

impl RemoteBackend {
    /// Must not be called from inside an async runtime thread.
    pub fn new(config: RemoteConfig) -> Result<Self, GatewayError> {
        if config.endpoint.is_empty() {
            return Err(GatewayError::Config(format!(
                "remote backend needs an endpoint (set {ENDPOINT_ENV})"
            )));
        }
        let client = reqwest::blocking::Client::builder()
            .timeout(Duration::from_secs(config.timeout_secs))
            .build()
            .map_err(|e| GatewayError::Config(e.to_string()))?;
        Ok(Self { config, client })
    }

    fn error(&self, message: String) -> GatewayError {
        GatewayError::Backend {
            endpoint: self.config.endpoint.clone(),
            message,
        }
    }

    fn attempt(&self, body: &serde_json::Value, n: usize) -> Result<Vec<String>, Attempt> {
        let mut request = self.client.post(&self.config.endpoint).json(body);
        if let Some(token) = &self.config.token {
            request = request.bearer_auth(token);
        }
        let response = request.send().map_err(|e| Attempt::Retry(e.to_string()))?;
        let status = response.status();
        let text = response.text().map_err(|e| Attempt::Retry(e.to_string()))?;
        if status.as_u16() == 429 || status.is_server_error() {
            return Err(Attempt::Retry(format!("HTTP {status}")));
        }
        if !status.is_success() {
            return Err(Attempt::Fatal(format!("HTTP {status}: {}", truncate(&text))));
        }
        let parsed: ChatResponse = serde_json::from_str(&text)
            .map_err(|e| Attempt::Fatal(format!("malformed response body: {e}")))?;
        if parsed.choices.len() != n {
            return Err(Attempt::Fatal(format!(
                "malformed response body: expected {n} choices, got {}",
                parsed.choices.len()
            )));
        }
        Ok(parsed.choices.into_iter().map(|c| c.message.content).collect())
    }
}

fn truncate(s: &str) -> &str {
    let end = s.char_indices().nth(200).map_or(s.len(), |(i, _)| i);
    &s[..end]
}

impl ModelBackend for RemoteBackend {
    fn complete(&self, req: &CompletionRequest) -> Result<Vec<String>, GatewayError> {
        let body = json!({
            "model": self.config.model,
            "messages": [{"role": "user", "content": req.prompt}],
            "temperature": req.params.temperature,
            "max_tokens": req.params.max_tokens,
            "n": req.n,
        });
        let mut delay = self.config.backoff_ms;
        let mut attempt = 0;
        loop {
            match self.attempt(&body, req.n as usize) {
                Ok(out) => return Ok(out),
                Err(Attempt::Fatal(msg)) => return Err(self.error(msg)),
                Err(Attempt::Retry(msg)) if attempt >= self.config.max_retries => {
                    return Err(self.error(format!("{msg} (after {} attempts)", attempt + 1)));
                }
                Err(Attempt::Retry(msg)) => {
                    tracing::debug!(endpoint = %self.config.endpoint, attempt, %msg, "retrying");
                    std::thread::sleep(Duration::from_millis(delay));
                    delay = (delay * 2).min(self.config.max_backoff_ms);
                    attempt += 1;
                }
            }
        }
    }

    fn describe(&self) -> String {
        self.config.endpoint.clone()
    }
}
