//! Guidance-model backends: remote chat completions, scripted responses for
//! tests, and record/replay of delivered completions.

mod record;
mod remote;
mod scripted;

use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::proof::StateKey;

pub use record::{RecordEntry, RecordingBackend, ReplayBackend, RECORDING_SCHEMA};
pub use remote::{RateLimiter, RemoteBackend, RemoteConfig};
pub use scripted::{ScriptRule, ScriptedBackend};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum StopReason {
    /// The model ended its reply on its own.
    #[serde(rename = "stop")]
    Natural,
    /// The reply was cut off by the output-token cap.
    #[serde(rename = "length")]
    LengthCap,
}

impl StopReason {
    pub fn as_str(self) -> &'static str {
        match self {
            StopReason::Natural => "stop",
            StopReason::LengthCap => "length",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    User,
    Assistant,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Turn {
    pub role: Role,
    pub content: String,
}

impl Turn {
    pub fn user(content: impl Into<String>) -> Self {
        Self {
            role: Role::User,
            content: content.into(),
        }
    }

    pub fn assistant(content: impl Into<String>) -> Self {
        Self {
            role: Role::Assistant,
            content: content.into(),
        }
    }
}

/// Why the agent issued a query. Not sent over the wire.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub enum QueryPurpose {
    #[default]
    Tactic,
    Sketch,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CompletionRequest {
    pub system: String,
    pub turns: Vec<Turn>,
    pub temperature: f64,
    pub max_tokens: u32,
    pub stop: Vec<String>,
    /// Search state the query is about, for scripted backends.
    pub state_key: Option<StateKey>,
    /// 1-based count of queries issued at `state_key` so far, this one included.
    pub ordinal: u32,
    pub purpose: QueryPurpose,
}

pub const DEFAULT_MAX_TOKENS: u32 = 256;

impl CompletionRequest {
    pub fn new(system: impl Into<String>, user: impl Into<String>) -> Self {
        Self {
            system: system.into(),
            turns: vec![Turn::user(user)],
            temperature: 0.0,
            max_tokens: DEFAULT_MAX_TOKENS,
            stop: Vec::new(),
            state_key: None,
            ordinal: 1,
            purpose: QueryPurpose::Tactic,
        }
    }

    pub fn at_state(mut self, key: StateKey, ordinal: u32) -> Self {
        self.state_key = Some(key);
        self.ordinal = ordinal;
        self
    }

    pub fn validate(&self) -> Result<(), LlmError> {
        if !(self.temperature >= 0.0) {
            return Err(LlmError::InvalidRequest(
                "temperature must be non-negative".into(),
            ));
        }
        if self.max_tokens == 0 {
            return Err(LlmError::InvalidRequest(
                "max_tokens must be positive".into(),
            ));
        }
        if self.turns.is_empty() {
            return Err(LlmError::InvalidRequest("no conversation turns".into()));
        }
        Ok(())
    }

    /// Text that identifies the request content, used for replay checks.
    pub fn fingerprint(&self) -> String {
        use sha2::{Digest, Sha256};
        let mut h = Sha256::new();
        h.update(self.system.as_bytes());
        for t in &self.turns {
            h.update([0u8]);
            h.update(match t.role {
                Role::User => b"u",
                Role::Assistant => b"a",
            });
            h.update(t.content.as_bytes());
        }
        hex::encode(h.finalize())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Completion {
    pub text: String,
    pub stop_reason: StopReason,
    pub latency: Duration,
}

#[derive(Debug, Error)]
pub enum LlmError {
    #[error("invalid request: {0}")]
    InvalidRequest(String),
    #[error("transport failed after {attempts} attempts: {message}")]
    Transport { attempts: u32, message: String },
    #[error("malformed completion payload: {0}")]
    Protocol(String),
    #[error("replay diverged at query {seq}: {message}")]
    ReplayDivergence { seq: usize, message: String },
    #[error("replay log exhausted after {0} queries")]
    ReplayExhausted(usize),
    #[error("recording i/o: {0}")]
    Io(#[from] std::io::Error),
    #[error("configuration: {0}")]
    Config(String),
}

pub trait GuidanceBackend: Send {
    /// Produces exactly one completion for the request.
    fn complete(&mut self, request: &CompletionRequest) -> Result<Completion, LlmError>;
}

impl<B: GuidanceBackend + ?Sized> GuidanceBackend for Box<B> {
    fn complete(&mut self, request: &CompletionRequest) -> Result<Completion, LlmError> {
        (**self).complete(request)
    }
}
