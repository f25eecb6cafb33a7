use std::fmt;

use serde::{Deserialize, Serialize};

use super::config::SearchConfig;
use crate::llm::StopReason;
use crate::proof::{StateKey, Tactic};

pub const TRACE_SCHEMA: &str = "tacsearch.trace/1";

/// How the failure table is scoped across ensemble stages.
pub const BAD_TABLE_POLICY: &str = "reset_per_stage";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Plain,
    Retrieval,
    Informal,
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Stage::Plain => "plain",
            Stage::Retrieval => "retrieval",
            Stage::Informal => "informal",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ResultClass {
    Qed,
    Progressed,
    Error,
    NoProgress,
}

impl fmt::Display for ResultClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ResultClass::Qed => "qed",
            ResultClass::Progressed => "progressed",
            ResultClass::Error => "error",
            ResultClass::NoProgress => "no-progress",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ParseOutcome {
    Tactic { tactic: Tactic, salvaged: bool },
    FormatError { reason: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QueryKind {
    Tactic,
    Sketch,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueryRecord {
    /// Episode-wide, contiguous from 1.
    pub ordinal: u32,
    pub stage: Stage,
    pub kind: QueryKind,
    pub state_key: Option<StateKey>,
    /// Queries issued at `state_key` within the stage, this one included.
    pub state_ordinal: u32,
    pub prompt_tokens: usize,
    pub prompt: String,
    pub response: String,
    pub stop_reason: StopReason,
    pub parsed: Option<ParseOutcome>,
    pub result: Option<ResultClass>,
    pub latency_s: f64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "reason", content = "detail", rename_all = "snake_case")]
pub enum FailureReason {
    Budget,
    Timeout,
    SearchExhausted,
    Infrastructure(String),
}

impl fmt::Display for FailureReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FailureReason::Budget => f.write_str("budget"),
            FailureReason::Timeout => f.write_str("timeout"),
            FailureReason::SearchExhausted => f.write_str("search exhausted"),
            FailureReason::Infrastructure(m) => write!(f, "infrastructure: {m}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum SearchOutcome {
    Proved { proof: Vec<Tactic> },
    Failed { reason: FailureReason },
}

impl SearchOutcome {
    pub fn is_proved(&self) -> bool {
        matches!(self, SearchOutcome::Proved { .. })
    }

    pub fn proof(&self) -> Option<&[Tactic]> {
        match self {
            SearchOutcome::Proved { proof } => Some(proof),
            SearchOutcome::Failed { .. } => None,
        }
    }

    pub fn failure(&self) -> Option<&FailureReason> {
        match self {
            SearchOutcome::Failed { reason } => Some(reason),
            SearchOutcome::Proved { .. } => None,
        }
    }
}

/// One step of the search procedure, in the order it happened.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum TraceEvent {
    StageStart {
        stage: Stage,
    },
    StageSkipped {
        stage: Stage,
        reason: String,
    },
    Push {
        depth: usize,
        state_key: StateKey,
    },
    Retrieve {
        depth: usize,
        hits: Vec<(String, f64)>,
    },
    Query {
        ordinal: u32,
        depth: usize,
    },
    FormatError {
        ordinal: u32,
    },
    Tactic {
        ordinal: u32,
        tactic: Tactic,
    },
    Transition {
        tactic: Tactic,
        result: ResultClass,
        next_key: Option<StateKey>,
    },
    BadAdded {
        depth: usize,
        tactic: Tactic,
    },
    Pop {
        depth: usize,
    },
    Qed {
        proof_len: usize,
    },
    StageEnd {
        stage: Stage,
        outcome: SearchOutcome,
    },
    Sketch {
        ordinal: u32,
    },
}

impl TraceEvent {
    /// Compact, key-free rendering for comparisons in tests and logs.
    pub fn summary(&self) -> String {
        match self {
            TraceEvent::StageStart { stage } => format!("stage {stage}"),
            TraceEvent::StageSkipped { stage, reason } => format!("skip {stage}: {reason}"),
            TraceEvent::Push { depth, .. } => format!("push {depth}"),
            TraceEvent::Retrieve { depth, hits } => {
                let names: Vec<&str> = hits.iter().map(|(n, _)| n.as_str()).collect();
                format!("retrieve {depth} [{}]", names.join(","))
            }
            TraceEvent::Query { ordinal, depth } => format!("query {ordinal} @{depth}"),
            TraceEvent::FormatError { ordinal } => format!("format-error {ordinal}"),
            TraceEvent::Tactic { tactic, .. } => format!("tactic {tactic}"),
            TraceEvent::Transition { tactic, result, .. } => format!("apply {tactic} -> {result}"),
            TraceEvent::BadAdded { depth, tactic } => format!("bad {depth} {tactic}"),
            TraceEvent::Pop { depth } => format!("pop {depth}"),
            TraceEvent::Qed { proof_len } => format!("qed {proof_len}"),
            TraceEvent::StageEnd { stage, outcome } => match outcome {
                SearchOutcome::Proved { .. } => format!("end {stage} proved"),
                SearchOutcome::Failed { reason } => format!("end {stage} {reason}"),
            },
            TraceEvent::Sketch { ordinal } => format!("sketch {ordinal}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceSummary {
    pub outcome: SearchOutcome,
    pub queries_used: u32,
    pub wall_seconds: f64,
    /// Last stage that ran.
    pub stage: Stage,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeTrace {
    pub schema: String,
    pub theorem: String,
    pub bad_table_policy: String,
    pub config: SearchConfig,
    pub events: Vec<TraceEvent>,
    pub queries: Vec<QueryRecord>,
    pub summary: Option<TraceSummary>,
}

impl EpisodeTrace {
    pub fn new(theorem: &str, config: &SearchConfig) -> Self {
        Self {
            schema: TRACE_SCHEMA.into(),
            theorem: theorem.into(),
            bad_table_policy: BAD_TABLE_POLICY.into(),
            config: config.clone(),
            events: Vec::new(),
            queries: Vec::new(),
            summary: None,
        }
    }

    pub fn query_count(&self) -> usize {
        self.queries.len()
    }

    pub fn summaries(&self) -> Vec<String> {
        self.events.iter().map(TraceEvent::summary).collect()
    }

    /// Copy with every wall-clock measurement zeroed.
    pub fn without_wall_clock(&self) -> Self {
        let mut t = self.clone();
        for q in &mut t.queries {
            q.latency_s = 0.0;
        }
        if let Some(s) = &mut t.summary {
            s.wall_seconds = 0.0;
        }
        t
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("traces always serialize")
    }

    pub fn from_json(text: &str) -> Result<Self, String> {
        let t: Self = serde_json::from_str(text).map_err(|e| e.to_string())?;
        if t.schema != TRACE_SCHEMA {
            return Err(format!("unsupported trace schema '{}'", t.schema));
        }
        Ok(t)
    }
}
