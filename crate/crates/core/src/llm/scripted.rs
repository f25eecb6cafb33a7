use std::collections::{HashMap, VecDeque};
use std::time::Instant;

use super::{Completion, CompletionRequest, GuidanceBackend, LlmError, QueryPurpose, StopReason};
use crate::proof::StateKey;

/// Custom response program consulted before the tables. Returning `None`
/// falls through to the table lookups.
pub type ScriptRule =
    Box<dyn FnMut(&CompletionRequest) -> Option<(String, StopReason)> + Send + 'static>;

/// Deterministic backend answering from a program keyed by state and
/// per-state query ordinal.
///
/// Lookup order: rule, `(state, ordinal)` table, queued replies for the
/// state, global queue, default reply.
pub struct ScriptedBackend {
    rule: Option<ScriptRule>,
    by_ordinal: HashMap<(StateKey, u32), (String, StopReason)>,
    by_state: HashMap<StateKey, VecDeque<String>>,
    queue: VecDeque<String>,
    default: (String, StopReason),
    sketch: String,
    calls: usize,
}

impl Default for ScriptedBackend {
    fn default() -> Self {
        Self::new("I am not sure how to continue.")
    }
}

impl ScriptedBackend {
    pub fn new(default_reply: impl Into<String>) -> Self {
        Self {
            rule: None,
            by_ordinal: HashMap::new(),
            by_state: HashMap::new(),
            queue: VecDeque::new(),
            default: (default_reply.into(), StopReason::Natural),
            sketch: String::new(),
            calls: 0,
        }
    }

    /// Replies in order regardless of state, then the default.
    pub fn sequence<I, S>(replies: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        Self {
            queue: replies.into_iter().map(Into::into).collect(),
            ..Self::default()
        }
    }

    pub fn with_rule(mut self, rule: ScriptRule) -> Self {
        self.rule = Some(rule);
        self
    }

    pub fn with_default(mut self, reply: impl Into<String>, stop: StopReason) -> Self {
        self.default = (reply.into(), stop);
        self
    }

    pub fn with_sketch(mut self, sketch: impl Into<String>) -> Self {
        self.sketch = sketch.into();
        self
    }

    pub fn at(mut self, key: StateKey, ordinal: u32, reply: impl Into<String>) -> Self {
        self.by_ordinal
            .insert((key, ordinal), (reply.into(), StopReason::Natural));
        self
    }

    pub fn at_with_stop(
        mut self,
        key: StateKey,
        ordinal: u32,
        reply: impl Into<String>,
        stop: StopReason,
    ) -> Self {
        self.by_ordinal.insert((key, ordinal), (reply.into(), stop));
        self
    }

    /// Queues a reply for any query at `key` not covered by the ordinal table.
    pub fn push_for_state(mut self, key: StateKey, reply: impl Into<String>) -> Self {
        self.by_state
            .entry(key)
            .or_default()
            .push_back(reply.into());
        self
    }

    pub fn calls(&self) -> usize {
        self.calls
    }

    fn answer(&mut self, request: &CompletionRequest) -> (String, StopReason) {
        if request.purpose == QueryPurpose::Sketch {
            return (self.sketch.clone(), StopReason::Natural);
        }
        if let Some(rule) = self.rule.as_mut() {
            if let Some(r) = rule(request) {
                return r;
            }
        }
        if let Some(key) = &request.state_key {
            if let Some(r) = self.by_ordinal.get(&(key.clone(), request.ordinal)) {
                return r.clone();
            }
            if let Some(r) = self.by_state.get_mut(key).and_then(VecDeque::pop_front) {
                return (r, StopReason::Natural);
            }
        }
        if let Some(r) = self.queue.pop_front() {
            return (r, StopReason::Natural);
        }
        self.default.clone()
    }
}

impl GuidanceBackend for ScriptedBackend {
    fn complete(&mut self, request: &CompletionRequest) -> Result<Completion, LlmError> {
        request.validate()?;
        let start = Instant::now();
        self.calls += 1;
        let (text, stop_reason) = self.answer(request);
        Ok(Completion {
            text,
            stop_reason,
            latency: start.elapsed(),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::proof::{canonical_key, Obligation, ProofState};

    fn key(goal: &str) -> StateKey {
        canonical_key(&ProofState::single(Obligation::new(goal)))
    }

    #[test]
    fn keyed_program_and_fallthrough() {
        let s = key("P");
        let mut b = ScriptedBackend::new("fallback")
            .at(s.clone(), 1, "[RUN TACTIC] intro h [END]")
            .push_for_state(s.clone(), "queued");
        let req = |o| CompletionRequest::new("sys", "u").at_state(s.clone(), o);
        let c = b.complete(&req(1)).unwrap();
        assert_eq!(c.text, "[RUN TACTIC] intro h [END]");
        assert_eq!(c.stop_reason, StopReason::Natural);
        assert_eq!(b.complete(&req(2)).unwrap().text, "queued");
        assert_eq!(b.complete(&req(3)).unwrap().text, "fallback");
        assert_eq!(b.calls(), 3);
    }

    #[test]
    fn rule_takes_precedence() {
        let mut b = ScriptedBackend::sequence(["a", "b"]).with_rule(Box::new(|r| {
            (r.ordinal == 7).then(|| ("seven".to_string(), StopReason::LengthCap))
        }));
        let mut r = CompletionRequest::new("s", "u");
        assert_eq!(b.complete(&r).unwrap().text, "a");
        r.ordinal = 7;
        let c = b.complete(&r).unwrap();
        assert_eq!(
            (c.text.as_str(), c.stop_reason),
            ("seven", StopReason::LengthCap)
        );
        r.ordinal = 1;
        assert_eq!(b.complete(&r).unwrap().text, "b");
    }

    #[test]
    fn sketch_queries_get_the_sketch() {
        let mut b = ScriptedBackend::default().with_sketch("use h");
        let mut r = CompletionRequest::new("s", "u");
        r.purpose = QueryPurpose::Sketch;
        assert_eq!(b.complete(&r).unwrap().text, "use h");
    }
}
