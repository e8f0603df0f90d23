//! Blocking HTTP clients for the model services.
//!
//! Chat speaks the OpenAI chat-completions dialect. NLI and predicate/object
//! parsing take small JSON bodies; see the README for the wire examples.

use std::sync::{Condvar, Mutex};
use std::thread;
use std::time::Duration;

use log::{debug, warn};
use procgraph_core::backends::{
    BackendError, ChatBackend, ChatMessage, ChatParams, NliBackend, NliVerdict, PredicateObject,
    PredicateObjectBackend,
};
use reqwest::blocking::Client;
use reqwest::StatusCode;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq)]
pub struct RetryPolicy {
    /// Retries after the first attempt.
    pub max_retries: u32,
    pub base_delay: Duration,
    pub max_delay: Duration,
    pub per_try_timeout: Duration,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        RetryPolicy {
            max_retries: 4,
            base_delay: Duration::from_millis(500),
            max_delay: Duration::from_secs(8),
            per_try_timeout: Duration::from_secs(60),
        }
    }
}

impl RetryPolicy {
    pub fn delay(&self, attempt: u32) -> Duration {
        let factor = 1u32.checked_shl(attempt).unwrap_or(u32::MAX);
        self.base_delay.saturating_mul(factor).min(self.max_delay)
    }
}

/// Counting semaphore bounding in-flight requests.
#[derive(Debug)]
pub struct Semaphore {
    free: Mutex<usize>,
    cv: Condvar,
}

pub struct Permit<'a>(&'a Semaphore);

impl Semaphore {
    pub fn new(n: usize) -> Self {
        Semaphore { free: Mutex::new(n.max(1)), cv: Condvar::new() }
    }

    pub fn acquire(&self) -> Permit<'_> {
        let mut free = self.free.lock().unwrap_or_else(|p| p.into_inner());
        while *free == 0 {
            free = self.cv.wait(free).unwrap_or_else(|p| p.into_inner());
        }
        *free -= 1;
        Permit(self)
    }
}

impl Drop for Permit<'_> {
    fn drop(&mut self) {
        *self.0.free.lock().unwrap_or_else(|p| p.into_inner()) += 1;
        self.0.cv.notify_one();
    }
}

pub const DEFAULT_IN_FLIGHT: usize = 4;

/// Shared transport: retries, bearer auth from the environment, and the
/// in-flight bound.
pub struct JsonClient {
    client: Client,
    pub retry: RetryPolicy,
    /// Environment variable holding the bearer token; unset means no auth.
    pub api_key_env: String,
    gate: Semaphore,
}

impl JsonClient {
    pub fn new(retry: RetryPolicy, api_key_env: impl Into<String>, in_flight: usize) -> Result<Self, BackendError> {
        let client = Client::builder()
            .timeout(retry.per_try_timeout)
            .build()
            .map_err(|e| BackendError::InvalidParams(e.to_string()))?;
        Ok(JsonClient {
            client,
            retry,
            api_key_env: api_key_env.into(),
            gate: Semaphore::new(in_flight),
        })
    }

    pub fn post<B: Serialize, R: DeserializeOwned>(
        &self,
        service: &'static str,
        url: &str,
        body: &B,
    ) -> Result<R, BackendError> {
        let _permit = self.gate.acquire();
        let token = std::env::var(&self.api_key_env).ok().filter(|t| !t.is_empty());
        let mut last = String::new();
        for attempt in 0..=self.retry.max_retries {
            if attempt > 0 {
                let d = self.retry.delay(attempt - 1);
                debug!("{} retry {} in {:?}: {}", service, attempt, d, last);
                thread::sleep(d);
            }
            let mut req = self.client.post(url).json(body);
            if let Some(t) = &token {
                req = req.bearer_auth(t);
            }
            let resp = match req.send() {
                Ok(r) => r,
                Err(e) => {
                    last = e.to_string();
                    continue;
                }
            };
            let status = resp.status();
            if status.is_success() {
                return resp.json::<R>().map_err(|e| BackendError::Malformed(e.to_string()));
            }
            let text = resp.text().unwrap_or_default();
            last = format!("HTTP {}: {}", status.as_u16(), text.chars().take(200).collect::<String>());
            if !transient(status) {
                return Err(BackendError::unavailable(service, last));
            }
        }
        warn!("{} gave up after {} attempts", service, self.retry.max_retries + 1);
        Err(BackendError::unavailable(service, last))
    }
}

fn transient(s: StatusCode) -> bool {
    s == StatusCode::TOO_MANY_REQUESTS || s == StatusCode::REQUEST_TIMEOUT || s.is_server_error()
}

pub fn completions_url(endpoint: &str) -> String {
    let base = endpoint.trim_end_matches('/');
    if base.ends_with("/chat/completions") {
        base.to_string()
    } else {
        format!("{}/chat/completions", base)
    }
}

#[derive(Debug, Serialize)]
pub struct ChatRequest<'a> {
    pub model: &'a str,
    pub messages: &'a [ChatMessage],
    pub temperature: f64,
    pub seed: u64,
    pub max_tokens: u32,
}

#[derive(Debug, Deserialize)]
struct ChatResponse {
    choices: Vec<Choice>,
}

#[derive(Debug, Deserialize)]
struct Choice {
    message: ReplyMessage,
}

#[derive(Debug, Deserialize)]
struct ReplyMessage {
    #[serde(default)]
    content: Option<String>,
}

pub struct HttpChatBackend {
    pub transport: JsonClient,
}

impl ChatBackend for HttpChatBackend {
    fn chat(&self, messages: &[ChatMessage], params: &ChatParams) -> Result<String, BackendError> {
        params.check()?;
        if params.endpoint.is_empty() {
            return Err(BackendError::InvalidParams("no chat endpoint configured".into()));
        }
        let body = ChatRequest {
            model: &params.model,
            messages,
            temperature: params.temperature,
            seed: params.seed,
            max_tokens: params.max_tokens,
        };
        let resp: ChatResponse = self.transport.post("chat", &completions_url(&params.endpoint), &body)?;
        resp.choices
            .into_iter()
            .next()
            .and_then(|c| c.message.content)
            .ok_or_else(|| BackendError::Malformed("response has no choices[0].message.content".into()))
    }
}

#[derive(Debug, Serialize)]
struct NliRequest<'a> {
    premise: &'a str,
    hypothesis: &'a str,
}

pub struct HttpNli {
    pub transport: JsonClient,
    pub url: String,
}

impl NliBackend for HttpNli {
    fn nli(&self, premise: &str, hypothesis: &str) -> Result<NliVerdict, BackendError> {
        let v: NliVerdict = self.transport.post("nli", &self.url, &NliRequest { premise, hypothesis })?;
        if !(0.0..=1.0).contains(&v.confidence) {
            return Err(BackendError::Malformed(format!("confidence {} outside [0, 1]", v.confidence)));
        }
        Ok(v)
    }
}

#[derive(Debug, Serialize)]
struct ParseRequest<'a> {
    action: &'a str,
}

pub struct HttpPredicateObject {
    pub transport: JsonClient,
    pub url: String,
}

impl PredicateObjectBackend for HttpPredicateObject {
    fn extract(&self, action: &str) -> Result<PredicateObject, BackendError> {
        self.transport.post("parser", &self.url, &ParseRequest { action })
    }
}
