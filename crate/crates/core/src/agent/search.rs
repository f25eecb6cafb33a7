use std::collections::HashMap;

use super::config::{Budget, Exhausted, SearchConfig};
use super::trace::{
    EpisodeTrace, FailureReason, ParseOutcome, QueryKind, QueryRecord, ResultClass, SearchOutcome,
    Stage, TraceEvent, TraceSummary,
};
use crate::llm::{CompletionRequest, GuidanceBackend};
use crate::prompt::{
    parse_tactic, promptify_with, CharEstimator, FormatError, LastStep, PromptBundle, StepOutcome,
};
use crate::proof::{
    at_least_as_hard, canonical_key, is_qed, GlobalContext, ProofEnvironment, ProofState, StateKey,
    Tactic,
};
use crate::retrieval::{retrieve, RetrievalIndex, RetrievalResult};

pub const NO_PROGRESS_MESSAGE: &str =
    "no progress: the resulting goals are at least as hard as goals already on the search path";
pub const DEPTH_LIMIT_MESSAGE: &str = "no progress: maximum search depth reached";
pub const BACKTRACK_MESSAGE: &str = "backtracked: no proof was found after this step";

/// Why a stage stopped early.
#[derive(Debug, Clone, PartialEq, Eq)]
pub(crate) enum Abort {
    Budget,
    Timeout,
    Infrastructure(String),
}

impl From<Exhausted> for Abort {
    fn from(e: Exhausted) -> Self {
        match e {
            Exhausted::Queries => Abort::Budget,
            Exhausted::Time => Abort::Timeout,
        }
    }
}

impl From<Abort> for FailureReason {
    fn from(a: Abort) -> Self {
        match a {
            Abort::Budget => FailureReason::Budget,
            Abort::Timeout => FailureReason::Timeout,
            Abort::Infrastructure(m) => FailureReason::Infrastructure(m),
        }
    }
}

struct Frame {
    state: ProofState,
    key: StateKey,
    rho: Option<RetrievalResult>,
    chosen: Option<Tactic>,
}

/// One depth-first search run over a shared budget and trace.
pub(crate) struct StageRun<'a, E: ?Sized, B: ?Sized> {
    pub env: &'a mut E,
    pub backend: &'a mut B,
    pub index: Option<&'a RetrievalIndex>,
    pub ctx: &'a GlobalContext,
    pub config: &'a SearchConfig,
    pub budget: &'a mut Budget,
    pub trace: &'a mut EpisodeTrace,
    pub stage: Stage,
    stack: Vec<Frame>,
    bad: HashMap<StateKey, Vec<Tactic>>,
    asked: HashMap<StateKey, u32>,
    last_step: Option<LastStep>,
}

impl<'a, E, B> StageRun<'a, E, B>
where
    E: ProofEnvironment + ?Sized,
    B: GuidanceBackend + ?Sized,
{
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        env: &'a mut E,
        backend: &'a mut B,
        index: Option<&'a RetrievalIndex>,
        ctx: &'a GlobalContext,
        config: &'a SearchConfig,
        budget: &'a mut Budget,
        trace: &'a mut EpisodeTrace,
        stage: Stage,
    ) -> Self {
        Self {
            env,
            backend,
            index,
            ctx,
            config,
            budget,
            trace,
            stage,
            stack: Vec::new(),
            bad: HashMap::new(),
            asked: HashMap::new(),
            last_step: None,
        }
    }

    pub fn run(mut self, initial: &ProofState) -> SearchOutcome {
        self.trace
            .events
            .push(TraceEvent::StageStart { stage: self.stage });
        let outcome = if is_qed(initial) {
            SearchOutcome::Proved { proof: Vec::new() }
        } else {
            match self.dfs(initial.clone()) {
                Ok(Some(proof)) => {
                    self.trace.events.push(TraceEvent::Qed {
                        proof_len: proof.len(),
                    });
                    SearchOutcome::Proved { proof }
                }
                Ok(None) => SearchOutcome::Failed {
                    reason: FailureReason::SearchExhausted,
                },
                Err(a) => SearchOutcome::Failed { reason: a.into() },
            }
        };
        self.trace.events.push(TraceEvent::StageEnd {
            stage: self.stage,
            outcome: outcome.clone(),
        });
        outcome
    }

    fn depth(&self) -> usize {
        self.stack.len() - 1
    }

    fn dfs(&mut self, state: ProofState) -> Result<Option<Vec<Tactic>>, Abort> {
        let key = canonical_key(&state);
        let depth = self.stack.len();
        self.trace.events.push(TraceEvent::Push {
            depth,
            state_key: key.clone(),
        });
        let rho = match self.index {
            Some(index) => {
                let r = retrieve(index, &state, self.config.k_retrieve)
                    .map_err(|e| Abort::Infrastructure(e.to_string()))?;
                self.trace.events.push(TraceEvent::Retrieve {
                    depth,
                    hits: r
                        .hits
                        .iter()
                        .map(|h| (h.record.name.clone(), h.score))
                        .collect(),
                });
                Some(r)
            }
            None => None,
        };
        self.stack.push(Frame {
            state: state.clone(),
            key: key.clone(),
            rho,
            chosen: None,
        });

        for _ in 0..self.config.per_state_budget {
            let Some((tactic, query_idx)) = self.propose()? else {
                continue;
            };
            self.budget.check_time()?;
            let next = self
                .env
                .apply_tactic(&state, &tactic)
                .map_err(|e| Abort::Infrastructure(e.to_string()))?;

            let class = if is_qed(&next) {
                ResultClass::Qed
            } else if next.is_error() {
                ResultClass::Error
            } else if self.stack.len() >= self.config.max_depth || self.guard_rejects(&next) {
                ResultClass::NoProgress
            } else {
                ResultClass::Progressed
            };
            self.trace.queries[query_idx].result = Some(class);
            self.trace.events.push(TraceEvent::Transition {
                tactic: tactic.clone(),
                result: class,
                next_key: (!next.is_error()).then(|| canonical_key(&next)),
            });

            match class {
                ResultClass::Qed => {
                    let mut proof: Vec<Tactic> =
                        self.stack.iter().filter_map(|f| f.chosen.clone()).collect();
                    proof.push(tactic);
                    return Ok(Some(proof));
                }
                ResultClass::Error | ResultClass::NoProgress => {
                    let message = match (class, next.error_message()) {
                        (ResultClass::Error, Some(m)) => m.to_string(),
                        _ if self.stack.len() >= self.config.max_depth => {
                            DEPTH_LIMIT_MESSAGE.into()
                        }
                        _ => NO_PROGRESS_MESSAGE.into(),
                    };
                    self.mark_bad(&key, tactic.clone());
                    self.last_step = Some(LastStep {
                        tactic,
                        outcome: StepOutcome::Error(message),
                    });
                }
                ResultClass::Progressed => {
                    self.stack.last_mut().expect("frame pushed").chosen = Some(tactic.clone());
                    self.last_step = Some(LastStep {
                        tactic: tactic.clone(),
                        outcome: StepOutcome::Success,
                    });
                    if let Some(proof) = self.dfs(next)? {
                        return Ok(Some(proof));
                    }
                    self.stack.last_mut().expect("frame pushed").chosen = None;
                    self.last_step = Some(LastStep {
                        tactic,
                        outcome: StepOutcome::Error(BACKTRACK_MESSAGE.into()),
                    });
                }
            }
        }

        self.trace.events.push(TraceEvent::Pop { depth });
        self.stack.pop();
        Ok(None)
    }

    /// True when `next` is at least as hard as some state on the stack.
    fn guard_rejects(&self, next: &ProofState) -> bool {
        self.stack
            .iter()
            .any(|f| at_least_as_hard(next, &f.state).unwrap_or(true))
    }

    fn mark_bad(&mut self, key: &StateKey, tactic: Tactic) {
        let depth = self.depth();
        let list = self.bad.entry(key.clone()).or_default();
        if !list.contains(&tactic) {
            list.push(tactic.clone());
        }
        self.trace
            .events
            .push(TraceEvent::BadAdded { depth, tactic });
    }

    fn bundle(&self, format_error: Option<FormatError>) -> PromptBundle {
        let frame = self.stack.last().expect("frame pushed");
        PromptBundle {
            stack: self.stack.iter().map(|f| f.state.clone()).collect(),
            bad: self.bad.get(&frame.key).cloned().unwrap_or_default(),
            retrieved: frame.rho.clone(),
            context: Some(self.ctx.clone()),
            steps: self.stack.iter().filter_map(|f| f.chosen.clone()).collect(),
            last_step: self.last_step.clone(),
            format_error,
        }
    }

    /// Asks the backend for one tactic, repairing malformed replies up to the
    /// retry cap. Returns the tactic and the index of its query record, or
    /// `None` when every reply was malformed.
    fn propose(&mut self) -> Result<Option<(Tactic, usize)>, Abort> {
        let mut format_error = None;
        for _ in 0..=self.config.format_retry_cap {
            self.budget.check()?;
            let prompt = promptify_with(
                &self.bundle(format_error.take()),
                self.config.token_budget,
                &CharEstimator,
                self.config.system_prompt,
            )
            .map_err(|e| Abort::Infrastructure(e.to_string()))?;
            let key = self.stack.last().expect("frame pushed").key.clone();
            let asked = self.asked.entry(key.clone()).or_insert(0);
            *asked += 1;
            let state_ordinal = *asked;
            let mut request = CompletionRequest::new(prompt.system, prompt.agent.clone())
                .at_state(key.clone(), state_ordinal);
            request.max_tokens = self.config.max_output_tokens;
            let completion = self
                .backend
                .complete(&request)
                .map_err(|e| Abort::Infrastructure(e.to_string()))?;
            self.budget.charge();
            let ordinal = self.trace.queries.len() as u32 + 1;
            let depth = self.depth();
            self.trace.events.push(TraceEvent::Query { ordinal, depth });
            let parsed = parse_tactic(&completion.text, completion.stop_reason);
            self.trace.queries.push(QueryRecord {
                ordinal,
                stage: self.stage,
                kind: QueryKind::Tactic,
                state_key: Some(key),
                state_ordinal,
                prompt_tokens: prompt.tokens,
                prompt: prompt.agent,
                response: completion.text,
                stop_reason: completion.stop_reason,
                parsed: Some(match &parsed {
                    Ok(a) => ParseOutcome::Tactic {
                        tactic: a.tactic.clone(),
                        salvaged: a.salvaged,
                    },
                    Err(fe) => ParseOutcome::FormatError {
                        reason: fe.reason.clone(),
                    },
                }),
                result: None,
                latency_s: completion.latency.as_secs_f64(),
            });
            match parsed {
                Ok(action) => {
                    self.trace.events.push(TraceEvent::Tactic {
                        ordinal,
                        tactic: action.tactic.clone(),
                    });
                    return Ok(Some((action.tactic, self.trace.queries.len() - 1)));
                }
                Err(fe) => {
                    self.trace.events.push(TraceEvent::FormatError { ordinal });
                    format_error = Some(fe);
                }
            }
        }
        Ok(None)
    }
}

/// Runs one depth-first search episode from the theorem's initial state.
pub fn prove<E, B>(
    theorem: &str,
    env: &mut E,
    backend: &mut B,
    index: Option<&RetrievalIndex>,
    ctx: &GlobalContext,
    config: &SearchConfig,
) -> (SearchOutcome, EpisodeTrace)
where
    E: ProofEnvironment + ?Sized,
    B: GuidanceBackend + ?Sized,
{
    let mut trace = EpisodeTrace::new(theorem, config);
    let mut budget = Budget::for_config(config);
    let stage = if index.is_some() {
        Stage::Retrieval
    } else {
        Stage::Plain
    };
    let outcome = match start(theorem, env, config) {
        Ok(initial) => StageRun::new(
            env,
            backend,
            index,
            ctx,
            config,
            &mut budget,
            &mut trace,
            stage,
        )
        .run(&initial),
        Err(reason) => SearchOutcome::Failed { reason },
    };
    finish(&mut trace, &budget, outcome.clone(), stage);
    (outcome, trace)
}

pub(crate) fn start<E: ProofEnvironment + ?Sized>(
    theorem: &str,
    env: &mut E,
    config: &SearchConfig,
) -> Result<ProofState, FailureReason> {
    config
        .validate()
        .map_err(|e| FailureReason::Infrastructure(e.to_string()))?;
    let initial = env
        .initial_state(theorem)
        .map_err(|e| FailureReason::Infrastructure(e.to_string()))?;
    if initial.is_error() {
        return Err(FailureReason::Infrastructure(
            "initial state is an error state".into(),
        ));
    }
    Ok(initial)
}

pub(crate) fn finish(
    trace: &mut EpisodeTrace,
    budget: &Budget,
    outcome: SearchOutcome,
    stage: Stage,
) {
    trace.summary = Some(TraceSummary {
        outcome,
        queries_used: budget.used(),
        wall_seconds: budget.elapsed().as_secs_f64(),
        stage,
    });
}
