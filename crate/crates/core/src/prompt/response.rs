//! Response grammar and the partial-response salvage rule.
//!
//! ```text
//! response := ANY* "[RUN TACTIC]" TACTIC "[END]" ANY*
//!           | ANY* "[RUN TACTIC]" TACTIC            (only when cut off by the length cap)
//! ```

use serde::{Deserialize, Serialize};

use crate::llm::StopReason;
use crate::proof::Tactic;

pub const RUN_TACTIC: &str = "[RUN TACTIC]";
pub const END: &str = "[END]";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParsedAction {
    pub tactic: Tactic,
    /// Whether the tactic was salvaged from a response cut off by the length cap.
    pub salvaged: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FormatError {
    pub reason: String,
    pub response: String,
    pub stop_reason: StopReason,
}

impl FormatError {
    fn new(reason: &str, response: &str, stop_reason: StopReason) -> Self {
        Self {
            reason: reason.to_string(),
            response: response.to_string(),
            stop_reason,
        }
    }

    /// Body of the repair notice, between `[ERROR]` and `[END]`.
    pub fn repair_body(&self) -> String {
        format!(
            "\nInvalid response:\n'{}', \nStopping Reason: '{}'.\n Please respond only in the format specified.",
            self.response,
            self.stop_reason.as_str()
        )
    }

    /// Message sent back to the model. Quotes the response verbatim.
    pub fn repair_message(&self) -> String {
        format!("[ERROR]{}[END]", self.repair_body())
    }
}

pub fn parse_tactic(response: &str, stop_reason: StopReason) -> Result<ParsedAction, FormatError> {
    let Some(start) = response.find(RUN_TACTIC) else {
        return Err(FormatError::new(
            "missing [RUN TACTIC]",
            response,
            stop_reason,
        ));
    };
    let body = &response[start + RUN_TACTIC.len()..];
    let (text, salvaged) = match body.find(END) {
        Some(end) => (&body[..end], false),
        None if stop_reason == StopReason::LengthCap => (body, true),
        None => return Err(FormatError::new("missing [END]", response, stop_reason)),
    };
    match Tactic::new(text) {
        Ok(tactic) => Ok(ParsedAction { tactic, salvaged }),
        Err(_) => Err(FormatError::new("empty tactic", response, stop_reason)),
    }
}

/// Inverse of [`parse_tactic`] for well-formed replies.
pub fn render_response(tactic: &str) -> String {
    format!("{RUN_TACTIC} {tactic} {END}")
}
