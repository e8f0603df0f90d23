//! Contracts for external model services and their offline stand-ins.

mod heuristic;

use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use heuristic::{HeuristicNer, HeuristicPredicateObject, RuleNli, ScriptedExtractor};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    System,
    User,
    Assistant,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChatMessage {
    pub role: Role,
    pub content: String,
}

impl ChatMessage {
    pub fn system(content: impl Into<String>) -> Self {
        ChatMessage { role: Role::System, content: content.into() }
    }

    pub fn user(content: impl Into<String>) -> Self {
        ChatMessage { role: Role::User, content: content.into() }
    }

    pub fn assistant(content: impl Into<String>) -> Self {
        ChatMessage { role: Role::Assistant, content: content.into() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatParams {
    pub model: String,
    pub temperature: f64,
    pub seed: u64,
    pub max_tokens: u32,
    /// Base URL of an OpenAI-compatible server; empty in stub mode.
    pub endpoint: String,
    /// Name of the environment variable holding the bearer token.
    pub api_key_env: String,
}

impl Default for ChatParams {
    fn default() -> Self {
        ChatParams {
            model: String::from("gpt-3.5-turbo"),
            temperature: 0.0,
            seed: 42,
            max_tokens: 2048,
            endpoint: String::new(),
            api_key_env: String::from("PROCGRAPH_API_KEY"),
        }
    }
}

impl ChatParams {
    pub fn check(&self) -> Result<(), BackendError> {
        // also rejects NaN
        #[allow(clippy::neg_cmp_op_on_partial_ord)]
        if !(self.temperature >= 0.0) {
            return Err(BackendError::InvalidParams(alloc::format!(
                "temperature must be >= 0, got {}",
                self.temperature
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum BackendError {
    #[error("{service}-unavailable: {message}")]
    Unavailable { service: &'static str, message: String },
    #[error("no fixture matches: {0}")]
    FixtureMiss(String),
    #[error("malformed response: {0}")]
    Malformed(String),
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
}

impl BackendError {
    pub fn unavailable(service: &'static str, message: impl Into<String>) -> Self {
        BackendError::Unavailable { service, message: message.into() }
    }
}

/// Chat completion. Implementations must be shareable across threads.
pub trait ChatBackend: Send + Sync {
    fn chat(&self, messages: &[ChatMessage], params: &ChatParams) -> Result<String, BackendError>;
}

impl<T: ChatBackend + ?Sized> ChatBackend for &T {
    fn chat(&self, messages: &[ChatMessage], params: &ChatParams) -> Result<String, BackendError> {
        (**self).chat(messages, params)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NliLabel {
    Entailment,
    Contradiction,
    Neutral,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NliVerdict {
    pub label: NliLabel,
    pub confidence: f64,
}

pub trait NliBackend: Send + Sync {
    fn nli(&self, premise: &str, hypothesis: &str) -> Result<NliVerdict, BackendError>;
}

pub trait NerBackend: Send + Sync {
    fn entities(&self, text: &str) -> Vec<String>;
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PredicateObject {
    pub predicate: String,
    /// Object with leading determiners removed; empty when there is none.
    pub object: String,
    /// Set when no verb-like token was found.
    #[serde(default)]
    pub low_confidence: bool,
}

pub trait PredicateObjectBackend: Send + Sync {
    fn extract(&self, action: &str) -> Result<PredicateObject, BackendError>;
}

/// The extraction model ("System1"): given the conversation so far, return
/// the next assistant turn.
pub trait ExtractorBackend {
    fn extract(&mut self, conversation: &[ChatMessage]) -> Result<String, BackendError>;
}

/// Any chat backend used as an extractor with fixed parameters.
pub struct ChatExtractor<'a> {
    pub backend: &'a dyn ChatBackend,
    pub params: ChatParams,
}

impl ExtractorBackend for ChatExtractor<'_> {
    fn extract(&mut self, conversation: &[ChatMessage]) -> Result<String, BackendError> {
        self.backend.chat(conversation, &self.params)
    }
}
