//! Prompt serialization: rendering search state into keyword-structured
//! agent prompts, and parsing model replies back into tactics.
//!
//! The agent-prompt grammar is documented in `docs/prompt-grammar.md` and is
//! enforced by [`check_agent_prompt`].

mod grammar;
mod render;
mod response;
mod tokens;

use serde::{Deserialize, Serialize};

use crate::proof::{GlobalContext, ProofState, Tactic};
use crate::retrieval::RetrievalResult;

pub use grammar::{check_agent_prompt, GrammarError};
pub use render::{promptify, promptify_with, sanitize_inline, sanitize_text, PromptError};
pub use response::{parse_tactic, render_response, FormatError, ParsedAction, END, RUN_TACTIC};
pub use tokens::{estimate_tokens, CharEstimator, TokenEstimator};

/// Reserved agent-prompt keywords, without brackets.
pub const KEYWORDS: [&str; 17] = [
    "GOALS",
    "GOAL",
    "HYPOTHESES",
    "HYPOTHESIS",
    "DEFINITIONS",
    "DEFINITION",
    "THEOREMS",
    "THEOREM",
    "INFORMAL PROOF",
    "STEPS",
    "STEP",
    "INCORRECT STEPS",
    "LAST STEP",
    "SUCCESS",
    "ERROR MESSAGE",
    "ERROR",
    "END",
];

pub const DEFAULT_TOKEN_BUDGET: usize = 4096;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "message", rename_all = "snake_case")]
pub enum StepOutcome {
    Success,
    Error(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LastStep {
    pub tactic: Tactic,
    pub outcome: StepOutcome,
}

/// Everything the prompt may show for one query.
#[derive(Debug, Clone, Default)]
pub struct PromptBundle {
    /// Search stack, outermost first; the last entry is the current state.
    pub stack: Vec<ProofState>,
    /// Tactics known to be bad at the current state, in insertion order.
    pub bad: Vec<Tactic>,
    pub retrieved: Option<RetrievalResult>,
    pub context: Option<GlobalContext>,
    /// Tactics along the stack path that led to the current state.
    pub steps: Vec<Tactic>,
    pub last_step: Option<LastStep>,
    pub format_error: Option<FormatError>,
}

impl PromptBundle {
    pub fn current(&self) -> Option<&ProofState> {
        self.stack.last()
    }
}

/// Optional prompt parts, from first dropped to last dropped when the token
/// budget is tight. Goals are never dropped.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Section {
    Steps,
    InformalProof,
    Retrieved,
    IncorrectSteps,
    LastStep,
    FormatError,
}

impl Section {
    pub const DROP_ORDER: [Section; 6] = [
        Section::Steps,
        Section::InformalProof,
        Section::Retrieved,
        Section::IncorrectSteps,
        Section::LastStep,
        Section::FormatError,
    ];
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SystemPromptKind {
    LeanStyle,
    CoqStyle,
}

pub const LEAN_SYSTEM_PROMPT: &str = include_str!("../../assets/system_prompt_lean.md");
pub const COQ_SYSTEM_PROMPT: &str = include_str!("../../assets/system_prompt_coq.md");
pub const SKETCH_FEW_SHOT: &str = include_str!("../../assets/informal_sketch_fewshot.md");

impl SystemPromptKind {
    pub fn text(self) -> &'static str {
        match self {
            SystemPromptKind::LeanStyle => LEAN_SYSTEM_PROMPT,
            SystemPromptKind::CoqStyle => COQ_SYSTEM_PROMPT,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AgentPrompt {
    pub system: String,
    pub agent: String,
    /// Estimated tokens of the agent text.
    pub tokens: usize,
    /// Sections omitted to fit the budget.
    pub dropped: Vec<Section>,
}
