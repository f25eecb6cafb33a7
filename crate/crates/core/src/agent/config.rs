use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::prompt::{SystemPromptKind, DEFAULT_TOKEN_BUDGET};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SearchConfig {
    /// Delivered completions allowed per episode, format repairs and the
    /// sketch call included.
    pub max_queries: u32,
    pub wall_timeout_seconds: f64,
    /// Tactic proposals tried at one state before backtracking.
    pub per_state_budget: u32,
    pub max_depth: usize,
    /// Repair queries allowed after a malformed reply, per proposal.
    pub format_retry_cap: u32,
    pub token_budget: usize,
    pub k_retrieve: usize,
    pub max_output_tokens: u32,
    pub system_prompt: SystemPromptKind,
}

impl Default for SearchConfig {
    fn default() -> Self {
        Self {
            max_queries: 60,
            wall_timeout_seconds: 600.0,
            per_state_budget: 4,
            max_depth: 50,
            format_retry_cap: 3,
            token_budget: DEFAULT_TOKEN_BUDGET,
            k_retrieve: 8,
            max_output_tokens: 256,
            system_prompt: SystemPromptKind::LeanStyle,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("invalid search config: {0}")]
pub struct ConfigError(pub String);

impl SearchConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        let counts = [
            ("max_queries", self.max_queries as usize),
            ("per_state_budget", self.per_state_budget as usize),
            ("max_depth", self.max_depth),
            ("token_budget", self.token_budget),
            ("k_retrieve", self.k_retrieve),
            ("max_output_tokens", self.max_output_tokens as usize),
        ];
        if let Some((name, _)) = counts.iter().find(|(_, v)| *v == 0) {
            return Err(ConfigError(format!("{name} must be at least 1")));
        }
        if !(self.wall_timeout_seconds > 0.0) {
            return Err(ConfigError("wall_timeout_seconds must be positive".into()));
        }
        Ok(())
    }

    pub fn wall_timeout(&self) -> Duration {
        Duration::from_secs_f64(self.wall_timeout_seconds)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Exhausted {
    Queries,
    Time,
}

/// Query and wall-clock allowance shared by every stage of an episode.
#[derive(Debug, Clone)]
pub struct Budget {
    max_queries: u32,
    used: u32,
    started: Instant,
    deadline: Instant,
}

impl Budget {
    pub fn new(max_queries: u32, timeout: Duration) -> Self {
        let started = Instant::now();
        Self {
            max_queries,
            used: 0,
            started,
            deadline: started + timeout,
        }
    }

    pub fn for_config(config: &SearchConfig) -> Self {
        Self::new(config.max_queries, config.wall_timeout())
    }

    /// Whether one more query may be issued.
    pub fn check(&self) -> Result<(), Exhausted> {
        if self.used >= self.max_queries {
            Err(Exhausted::Queries)
        } else if Instant::now() >= self.deadline {
            Err(Exhausted::Time)
        } else {
            Ok(())
        }
    }

    pub fn check_time(&self) -> Result<(), Exhausted> {
        if Instant::now() >= self.deadline {
            Err(Exhausted::Time)
        } else {
            Ok(())
        }
    }

    /// Records one delivered completion.
    pub fn charge(&mut self) {
        self.used += 1;
    }

    pub fn used(&self) -> u32 {
        self.used
    }

    pub fn remaining(&self) -> u32 {
        self.max_queries.saturating_sub(self.used)
    }

    pub fn elapsed(&self) -> Duration {
        self.started.elapsed()
    }
}
