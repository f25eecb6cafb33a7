use super::config::{Budget, SearchConfig};
use super::search::{finish, start, StageRun};
use super::trace::{
    EpisodeTrace, FailureReason, QueryKind, QueryRecord, SearchOutcome, Stage, TraceEvent,
};
use crate::llm::{CompletionRequest, GuidanceBackend, QueryPurpose};
use crate::prompt::{estimate_tokens, SKETCH_FEW_SHOT};
use crate::proof::{GlobalContext, ProofEnvironment};
use crate::retrieval::RetrievalIndex;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SketchError {
    Budget,
    Timeout,
    Infrastructure(String),
}

/// Asks the backend for an informal proof of `statement` with the fixed
/// few-shot exemplar. Costs one query from `budget`.
pub fn generate_informal_sketch<B: GuidanceBackend + ?Sized>(
    statement: &str,
    backend: &mut B,
    budget: &mut Budget,
    trace: &mut EpisodeTrace,
) -> Result<String, SketchError> {
    budget.check().map_err(|e| match e {
        super::config::Exhausted::Queries => SketchError::Budget,
        super::config::Exhausted::Time => SketchError::Timeout,
    })?;
    let user = format!("[THEOREM]\n{statement}\n[INFORMAL PROOF]\n");
    let mut request = CompletionRequest::new(SKETCH_FEW_SHOT, user.clone());
    request.purpose = QueryPurpose::Sketch;
    request.max_tokens = 512;
    let c = backend
        .complete(&request)
        .map_err(|e| SketchError::Infrastructure(e.to_string()))?;
    budget.charge();
    let ordinal = trace.queries.len() as u32 + 1;
    trace.events.push(TraceEvent::Sketch { ordinal });
    trace.queries.push(QueryRecord {
        ordinal,
        stage: Stage::Informal,
        kind: QueryKind::Sketch,
        state_key: None,
        state_ordinal: 1,
        prompt_tokens: estimate_tokens(&user),
        prompt: user,
        response: c.text.clone(),
        stop_reason: c.stop_reason,
        parsed: None,
        result: None,
        latency_s: c.latency.as_secs_f64(),
    });
    Ok(c.text.trim().to_string())
}

fn stops_ensemble(outcome: &SearchOutcome) -> bool {
    match outcome {
        SearchOutcome::Proved { .. } => true,
        SearchOutcome::Failed { reason } => !matches!(reason, FailureReason::SearchExhausted),
    }
}

/// Plain search, then search with retrieval, then retrieval plus an
/// informal sketch, all drawing on one query and time budget. The failure
/// table starts empty in each stage.
pub fn ensemble_prove<E, B>(
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
    let initial = match start(theorem, env, config) {
        Ok(s) => s,
        Err(reason) => {
            let outcome = SearchOutcome::Failed { reason };
            finish(&mut trace, &budget, outcome.clone(), Stage::Plain);
            return (outcome, trace);
        }
    };

    let mut last = Stage::Plain;
    let mut outcome = StageRun::new(
        env,
        backend,
        None,
        ctx,
        config,
        &mut budget,
        &mut trace,
        Stage::Plain,
    )
    .run(&initial);

    if !stops_ensemble(&outcome) {
        match index {
            Some(ix) => {
                last = Stage::Retrieval;
                outcome = StageRun::new(
                    env,
                    backend,
                    Some(ix),
                    ctx,
                    config,
                    &mut budget,
                    &mut trace,
                    Stage::Retrieval,
                )
                .run(&initial);
            }
            None => trace.events.push(TraceEvent::StageSkipped {
                stage: Stage::Retrieval,
                reason: "no retrieval index".into(),
            }),
        }
    }

    if !stops_ensemble(&outcome) {
        let skip = |reason: &str| TraceEvent::StageSkipped {
            stage: Stage::Informal,
            reason: reason.into(),
        };
        match generate_informal_sketch(ctx.theorem_statement(), backend, &mut budget, &mut trace) {
            Ok(sketch) => {
                last = Stage::Informal;
                let mut informed = ctx.clone();
                informed.informal_hints = Some(sketch);
                outcome = StageRun::new(
                    env,
                    backend,
                    index,
                    &informed,
                    config,
                    &mut budget,
                    &mut trace,
                    Stage::Informal,
                )
                .run(&initial);
            }
            Err(SketchError::Budget) => {
                trace.events.push(skip("skipped: budget"));
                outcome = SearchOutcome::Failed {
                    reason: FailureReason::Budget,
                };
            }
            Err(SketchError::Timeout) => {
                trace.events.push(skip("skipped: timeout"));
                outcome = SearchOutcome::Failed {
                    reason: FailureReason::Timeout,
                };
            }
            Err(SketchError::Infrastructure(m)) => {
                trace.events.push(skip(&format!("skipped: {m}")));
            }
        }
    }

    finish(&mut trace, &budget, outcome.clone(), last);
    (outcome, trace)
}
