use std::time::Duration;

use reqwest::blocking::Client;
use reqwest::header::CONTENT_TYPE;
use serde::{Deserialize, Serialize};

use super::policy::ReasonerPolicy;
use crate::error::{Error, Result};

/// Connection settings for an OpenAI-compatible chat completion endpoint.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RemoteConfig {
    /// Base URL, e.g. `http://127.0.0.1:11434`.
    pub endpoint: String,
    pub path: String,
    pub model: String,
    pub temperature: f64,
    pub max_tokens: u32,
    pub timeout_ms: u64,
    /// Extra attempts after the first failure.
    pub retries: u32,
    /// Delay before the first retry; doubles on each further retry.
    pub backoff_ms: u64,
}

impl Default for RemoteConfig {
    fn default() -> Self {
        RemoteConfig {
            endpoint: "http://127.0.0.1:11434".into(),
            path: "/v1/chat/completions".into(),
            model: "llama3.1:8b".into(),
            temperature: 0.0,
            max_tokens: 128,
            timeout_ms: 60_000,
            retries: 2,
            backoff_ms: 500,
        }
    }
}

#[derive(Serialize)]
struct ChatRequest<'a> {
    model: &'a str,
    messages: [ChatMessage<'a>; 1],
    temperature: f64,
    max_tokens: u32,
    stream: bool,
}

#[derive(Serialize)]
struct ChatMessage<'a> {
    role: &'a str,
    content: &'a str,
}

#[derive(Deserialize)]
struct ChatResponse {
    choices: Vec<Choice>,
    #[serde(default)]
    usage: Option<Usage>,
}

#[derive(Deserialize)]
struct Choice {
    message: ResponseMessage,
    #[serde(default)]
    finish_reason: Option<String>,
}

#[derive(Deserialize)]
struct ResponseMessage {
    #[serde(default)]
    content: Option<String>,
}

#[derive(Deserialize)]
struct Usage {
    #[serde(default)]
    prompt_tokens: u64,
    #[serde(default)]
    completion_tokens: u64,
}

/// Policy backed by a chat completion endpoint. Requests are sent one at a
/// time with a single user message.
pub struct RemotePolicy {
    config: RemoteConfig,
    client: Client,
    name: String,
    requests: u64,
}

impl RemotePolicy {
    pub fn new(config: RemoteConfig) -> Result<Self> {
        let client = Client::builder()
            .timeout(Duration::from_millis(config.timeout_ms))
            .build()
            .map_err(|e| Error::config(format!("http client: {e}")))?;
        let name = format!("remote:{}", config.model);
        Ok(RemotePolicy { config, client, name, requests: 0 })
    }

    pub fn config(&self) -> &RemoteConfig {
        &self.config
    }

    /// Requests issued so far, retries included.
    pub fn requests_sent(&self) -> u64 {
        self.requests
    }

    pub fn url(&self) -> String {
        format!("{}{}", self.config.endpoint.trim_end_matches('/'), self.config.path)
    }

    /// The exact JSON body sent for `prompt`.
    pub fn request_body(&self, prompt: &str) -> Result<String> {
        let req = ChatRequest {
            model: &self.config.model,
            messages: [ChatMessage { role: "user", content: prompt }],
            temperature: self.config.temperature,
            max_tokens: self.config.max_tokens,
            stream: false,
        };
        Ok(serde_json::to_string(&req)?)
    }

    fn send(&mut self, body: &str) -> std::result::Result<String, String> {
        self.requests += 1;
        let resp = self
            .client
            .post(self.url())
            .header(CONTENT_TYPE, "application/json")
            .body(body.to_string())
            .send()
            .map_err(|e| e.to_string())?;
        let status = resp.status();
        let text = resp.text().map_err(|e| e.to_string())?;
        if !status.is_success() {
            return Err(format!("status {status}"));
        }
        let parsed: ChatResponse = serde_json::from_str(&text).map_err(|e| format!("bad response body: {e}"))?;
        if let Some(u) = &parsed.usage {
            tracing::info!(prompt_tokens = u.prompt_tokens, completion_tokens = u.completion_tokens, "policy exchange");
        }
        let choice = parsed.choices.into_iter().next().ok_or("response has no choices")?;
        if choice.finish_reason.as_deref() == Some("length") {
            tracing::debug!("reply truncated at the token cap");
        }
        Ok(choice.message.content.unwrap_or_default())
    }
}

impl ReasonerPolicy for RemotePolicy {
    fn name(&self) -> &str {
        &self.name
    }

    fn decide(&mut self, prompt: &str) -> Result<String> {
        let body = self.request_body(prompt)?;
        let mut last = String::new();
        for attempt in 0..=self.config.retries {
            if attempt > 0 {
                let delay = self.config.backoff_ms.saturating_mul(1 << (attempt - 1).min(16));
                std::thread::sleep(Duration::from_millis(delay));
            }
            match self.send(&body) {
                Ok(text) => return Ok(text),
                Err(e) => {
                    tracing::warn!(attempt, "policy request failed: {e}");
                    last = e;
                }
            }
        }
        Err(Error::Policy(format!(
            "{} failed after {} attempts: {last}",
            self.url(),
            self.config.retries + 1
        )))
    }

    fn is_language_model(&self) -> bool {
        true
    }
}
