use std::time::Duration;

use tacsearch::agent::{
    ensemble_prove, prove, EpisodeTrace, FailureReason, ParseOutcome, QueryKind, ResultClass,
    SearchConfig, SearchOutcome, Stage, BACKTRACK_MESSAGE,
};
use tacsearch::llm::{
    Completion, CompletionRequest, GuidanceBackend, LlmError, ScriptedBackend, StopReason,
};
use tacsearch::prompt::render_response;
use tacsearch::proof::{
    canonical_key, is_qed, lift_transition, GlobalContext, ProofEnvironment, Tactic,
};
use tacsearch::retrieval::RetrievalIndex;
use tacsearch::toy::{oracle_backend, ToyEnv, ToySuite};

fn run(
    theorem: &str,
    backend: &mut dyn GuidanceBackend,
    config: &SearchConfig,
) -> (SearchOutcome, EpisodeTrace) {
    let suite = ToySuite::bundled();
    let mut env = ToyEnv::new(&suite);
    let ctx = GlobalContext::new(suite.theorem(theorem).unwrap().statement()).unwrap();
    prove(theorem, &mut env, backend, None, &ctx, config)
}

fn tactics(proof: &[Tactic]) -> Vec<&str> {
    proof.iter().map(Tactic::as_str).collect()
}

#[test]
fn identity_proved_in_two_queries() {
    let mut b =
        ScriptedBackend::sequence(["[RUN TACTIC] intro h [END]", "[RUN TACTIC] exact h [END]"]);
    let (out, trace) = run("t_id", &mut b, &SearchConfig::default());
    assert_eq!(tactics(out.proof().unwrap()), ["intro h", "exact h"]);
    assert_eq!(trace.query_count(), 2);
    assert_eq!(trace.summary.as_ref().unwrap().queries_used, 2);
}

#[test]
fn self_loop_lands_in_bad_and_next_prompt() {
    let suite = ToySuite::bundled();
    let root = suite.theorem("t_loop_bait").unwrap().initial_state();
    let key = canonical_key(&root);
    let mut b = ScriptedBackend::new("[RUN TACTIC] refl [END]")
        .at(key.clone(), 1, "[RUN TACTIC] rw hxx [END]")
        .at(key, 2, "[RUN TACTIC] rw h [END]");
    let (out, trace) = run("t_loop_bait", &mut b, &SearchConfig::default());
    assert_eq!(tactics(out.proof().unwrap()), ["rw h", "refl"]);
    assert_eq!(trace.queries[0].result, Some(ResultClass::NoProgress));
    assert!(!trace.queries[0].prompt.contains("[INCORRECT STEPS]"));
    assert!(trace.queries[1]
        .prompt
        .contains("[INCORRECT STEPS][STEP]rw hxx\n"));
    assert!(trace.queries[1]
        .prompt
        .contains("[LAST STEP]rw hxx\n[ERROR MESSAGE]no progress"));
}

#[test]
fn always_malformed_backend_exhausts_the_budget() {
    let config = SearchConfig {
        max_queries: 12,
        ..SearchConfig::default()
    };
    let mut b = ScriptedBackend::new("I think we should use induction.");
    let (out, trace) = run("t_id", &mut b, &config);
    assert_eq!(out.failure(), Some(&FailureReason::Budget));
    assert_eq!(trace.query_count(), 12);
    assert!(trace
        .queries
        .iter()
        .all(|q| matches!(q.parsed, Some(ParseOutcome::FormatError { .. }))));
    // Repair prompts carry the rejected reply back to the model.
    assert!(trace.queries[1]
        .prompt
        .contains("'I think we should use induction.'"));
    assert!(!trace.queries[4].prompt.contains("[ERROR]"));
}

#[test]
fn default_capacity_exhausts_search_before_budget() {
    // 4 proposals, each 1 + 3 queries, run out before 60 queries do.
    let mut b = ScriptedBackend::new("no tactic here");
    let (out, trace) = run("t_id", &mut b, &SearchConfig::default());
    assert_eq!(out.failure(), Some(&FailureReason::SearchExhausted));
    assert_eq!(trace.query_count(), 16);
}

#[test]
fn backtracking_reports_the_abandoned_step() {
    let mut b = ScriptedBackend::sequence([
        "[RUN TACTIC] intro h [END]",
        "[RUN TACTIC] split [END]",
        "[RUN TACTIC] exact h [END]",
        "[RUN TACTIC] intro hp [END]",
        "[RUN TACTIC] intro hq [END]",
        "[RUN TACTIC] exact hp [END]",
    ]);
    let config = SearchConfig {
        per_state_budget: 2,
        ..SearchConfig::default()
    };
    let (out, trace) = run("t_const", &mut b, &config);
    assert_eq!(
        tactics(out.proof().unwrap()),
        ["intro hp", "intro hq", "exact hp"]
    );
    let p = &trace.queries[3].prompt;
    assert!(
        p.contains(&format!(
            "[LAST STEP]intro h\n[ERROR MESSAGE]{BACKTRACK_MESSAGE}\n"
        )),
        "{p}"
    );
    assert!(!p.contains("[STEPS]"));
}

#[test]
fn depth_cap_counts_as_no_progress() {
    let config = SearchConfig {
        max_depth: 1,
        ..SearchConfig::default()
    };
    let mut b = ScriptedBackend::new("[RUN TACTIC] intro h [END]");
    let (out, trace) = run("t_id", &mut b, &config);
    assert_eq!(out.failure(), Some(&FailureReason::SearchExhausted));
    assert_eq!(trace.queries[0].result, Some(ResultClass::NoProgress));
}

#[test]
fn ensemble_falls_through_to_retrieval() {
    let suite = ToySuite::bundled();
    let index = RetrievalIndex::build(suite.corpus()).unwrap();
    let mut env = ToyEnv::new(&suite);
    let th = suite.theorem("t_gcd").unwrap();
    let ctx = GlobalContext::new(th.statement()).unwrap();
    let mut b = ScriptedBackend::default().with_rule(Box::new(|r| {
        let p = &r.turns[0].content;
        let reply = if p.contains("[GOAL] 1\na * b = a * b\n") {
            "refl"
        } else if p.contains("[THEOREM] gcd_mul_lcm") {
            "rw gcd_mul_lcm"
        } else {
            "refl"
        };
        Some((render_response(reply), StopReason::Natural))
    }));
    let config = SearchConfig {
        per_state_budget: 2,
        ..SearchConfig::default()
    };
    let (out, trace) = ensemble_prove("t_gcd", &mut env, &mut b, Some(&index), &ctx, &config);
    assert_eq!(tactics(out.proof().unwrap()), ["rw gcd_mul_lcm", "refl"]);
    let stages: Vec<Stage> = trace.queries.iter().map(|q| q.stage).collect();
    assert_eq!(
        stages,
        [
            Stage::Plain,
            Stage::Plain,
            Stage::Retrieval,
            Stage::Retrieval
        ]
    );
    assert_eq!(trace.summary.as_ref().unwrap().stage, Stage::Retrieval);
    assert!(trace.query_count() as u32 <= config.max_queries);
}

#[test]
fn ensemble_stops_after_first_stage_success() {
    let suite = ToySuite::bundled();
    let index = RetrievalIndex::build(suite.corpus()).unwrap();
    let mut env = ToyEnv::new(&suite);
    let ctx = GlobalContext::new("theorem t_refl_var : a = a").unwrap();
    let mut b = ScriptedBackend::new("[RUN TACTIC] refl [END]");
    let (out, trace) = ensemble_prove(
        "t_refl_var",
        &mut env,
        &mut b,
        Some(&index),
        &ctx,
        &SearchConfig::default(),
    );
    assert!(out.is_proved());
    assert!(trace.queries.iter().all(|q| q.stage == Stage::Plain));
}

#[test]
fn informal_stage_uses_the_sketch_and_pays_for_it() {
    let suite = ToySuite::bundled();
    let index = RetrievalIndex::build(suite.corpus()).unwrap();
    let mut env = ToyEnv::new(&suite);
    let th = suite.theorem("t_eq_sym").unwrap();
    let ctx = GlobalContext::new(th.statement()).unwrap();
    let mut b = ScriptedBackend::default()
        .with_sketch("Rewrite the goal with h and close it by reflexivity.")
        .with_rule(Box::new(|r| {
            let p = &r.turns[0].content;
            let reply = if !p.contains("[INFORMAL PROOF]") {
                "assumption"
            } else if p.contains("[GOAL] 1\nx = x\n") {
                "refl"
            } else {
                "rw ← h"
            };
            Some((render_response(reply), StopReason::Natural))
        }));
    let config = SearchConfig {
        per_state_budget: 1,
        ..SearchConfig::default()
    };
    let (out, trace) = ensemble_prove("t_eq_sym", &mut env, &mut b, Some(&index), &ctx, &config);
    assert_eq!(tactics(out.proof().unwrap()), ["rw ← h", "refl"]);
    let kinds: Vec<(Stage, QueryKind)> = trace.queries.iter().map(|q| (q.stage, q.kind)).collect();
    assert_eq!(
        kinds,
        [
            (Stage::Plain, QueryKind::Tactic),
            (Stage::Retrieval, QueryKind::Tactic),
            (Stage::Informal, QueryKind::Sketch),
            (Stage::Informal, QueryKind::Tactic),
            (Stage::Informal, QueryKind::Tactic),
        ]
    );
    assert!(trace.queries[3]
        .prompt
        .contains("[INFORMAL PROOF]\nRewrite the goal with h"));
}

#[test]
fn sketch_skipped_when_budget_is_spent() {
    let suite = ToySuite::bundled();
    let index = RetrievalIndex::build(suite.corpus()).unwrap();
    let mut env = ToyEnv::new(&suite);
    let ctx = GlobalContext::new("theorem t_id : P -> P").unwrap();
    let mut b = ScriptedBackend::new("[RUN TACTIC] split [END]");
    let config = SearchConfig {
        max_queries: 2,
        per_state_budget: 1,
        ..SearchConfig::default()
    };
    let (out, trace) = ensemble_prove("t_id", &mut env, &mut b, Some(&index), &ctx, &config);
    assert_eq!(out.failure(), Some(&FailureReason::Budget));
    assert_eq!(trace.query_count(), 2);
    assert!(trace
        .summaries()
        .contains(&"skip informal: skipped: budget".to_string()));
}

#[test]
fn oracle_backend_proves_with_proof_length_queries() {
    let suite = ToySuite::bundled();
    for th in suite.theorems() {
        let mut b =
            oracle_backend(th, 4).unwrap_or_else(|| panic!("{} has no oracle proof", th.name));
        let (out, trace) = run(&th.name, &mut b, &SearchConfig::default());
        let proof = out
            .proof()
            .unwrap_or_else(|| panic!("{}: {out:?}", th.name));
        assert_eq!(trace.query_count(), proof.len(), "{}", th.name);
        let mut env = ToyEnv::new(&suite);
        let init = env.initial_state(&th.name).unwrap();
        assert!(is_qed(&lift_transition(&mut env, &init, proof).unwrap()));
    }
}

struct Failing;

impl GuidanceBackend for Failing {
    fn complete(&mut self, _: &CompletionRequest) -> Result<Completion, LlmError> {
        Err(LlmError::Transport {
            attempts: 3,
            message: "connection refused".into(),
        })
    }
}

#[test]
fn backend_failure_is_infrastructure() {
    let (out, trace) = run("t_id", &mut Failing, &SearchConfig::default());
    assert!(
        matches!(out.failure(), Some(FailureReason::Infrastructure(m)) if m.contains("connection refused"))
    );
    assert_eq!(trace.query_count(), 0);
}

struct Slow;

impl GuidanceBackend for Slow {
    fn complete(&mut self, _: &CompletionRequest) -> Result<Completion, LlmError> {
        std::thread::sleep(Duration::from_millis(30));
        Ok(Completion {
            text: "[RUN TACTIC] split [END]".into(),
            stop_reason: StopReason::Natural,
            latency: Duration::from_millis(30),
        })
    }
}

#[test]
fn wall_timeout_stops_the_search() {
    let config = SearchConfig {
        wall_timeout_seconds: 0.05,
        ..SearchConfig::default()
    };
    let (out, trace) = run("t_id", &mut Slow, &config);
    assert_eq!(out.failure(), Some(&FailureReason::Timeout));
    assert!(trace.query_count() <= 3);
}

#[test]
fn unknown_theorem_is_infrastructure() {
    let mut b = ScriptedBackend::default();
    let (out, _) = run("t_id", &mut b, &SearchConfig::default());
    assert!(out.failure().is_some());
    let suite = ToySuite::bundled();
    let mut env = ToyEnv::new(&suite);
    let ctx = GlobalContext::new("x").unwrap();
    let (out, _) = prove(
        "missing",
        &mut env,
        &mut b,
        None,
        &ctx,
        &SearchConfig::default(),
    );
    assert!(matches!(
        out.failure(),
        Some(FailureReason::Infrastructure(_))
    ));
}

#[test]
fn traces_round_trip_through_json() {
    let mut b =
        ScriptedBackend::sequence(["[RUN TACTIC] intro h [END]", "[RUN TACTIC] exact h [END]"]);
    let (_, trace) = run("t_id", &mut b, &SearchConfig::default());
    let back = EpisodeTrace::from_json(&trace.to_json()).unwrap();
    assert_eq!(back, trace);
    assert_eq!(back.bad_table_policy, "reset_per_stage");
}
