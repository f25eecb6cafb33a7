use std::time::{Duration, Instant};

use tacsearch::bridge::{
    differential_toy, error_states_are_absorbing, run_conformance, BridgeConfig, BridgeSession,
    ConformanceProbe,
};
use tacsearch::proof::{is_qed, EnvError, ProofEnvironment, Tactic};
use tacsearch::toy::ToySuite;

fn adapter() -> Vec<String> {
    vec![env!("CARGO_BIN_EXE_toy-adapter").to_string()]
}

fn config(command: Vec<String>) -> BridgeConfig {
    BridgeConfig {
        command,
        timeout: Duration::from_secs(10),
        max_restarts: 0,
    }
}

fn sh(script: &str) -> Vec<String> {
    vec!["sh".into(), "-c".into(), script.into()]
}

fn t(s: &str) -> Tactic {
    Tactic::new(s).unwrap()
}

#[test]
fn loopback_matches_direct_env_on_the_whole_suite() {
    let mut s = BridgeSession::start(config(adapter())).unwrap();
    let n = differential_toy(&ToySuite::bundled(), &mut s, 3).unwrap();
    assert!(n > 1000, "only {n} pairs compared");
    error_states_are_absorbing(&mut s).unwrap();
}

#[test]
fn toy_adapter_passes_conformance() {
    let results = run_conformance(&config(adapter()), &ConformanceProbe::toy());
    assert_eq!(results.len(), 10);
    for r in &results {
        assert!(r.passed, "{r}");
    }
}

#[test]
fn conformance_flags_a_broken_adapter() {
    let results = run_conformance(
        &config(sh("read l; echo '{\"id\":99,\"status\":\"ok\"}'")),
        &ConformanceProbe::toy(),
    );
    assert!(!results[0].passed);
    assert!(
        results[0].detail.contains("does not echo"),
        "{}",
        results[0]
    );
}

#[test]
fn shutdown_exits_zero_promptly() {
    let mut s = BridgeSession::start(config(adapter())).unwrap();
    s.initial_state("t_id").unwrap();
    let start = Instant::now();
    let status = s.shutdown().unwrap();
    assert!(status.success());
    assert!(start.elapsed() < Duration::from_secs(10));
}

#[test]
fn malformed_response_names_the_line() {
    let mut s = BridgeSession::start(config(sh("read l; echo 'garbage out'; sleep 5"))).unwrap();
    match s.initial_state("t_id") {
        Err(EnvError::Infrastructure(msg)) => assert!(msg.contains("garbage out"), "{msg}"),
        other => panic!("expected infrastructure failure, got {other:?}"),
    }
}

#[test]
fn crash_is_infrastructure_not_proof_error() {
    let mut s = BridgeSession::start(config(sh("exit 3"))).unwrap();
    assert!(matches!(
        s.initial_state("t_id"),
        Err(EnvError::Infrastructure(_))
    ));
}

#[test]
fn silent_adapter_times_out() {
    let mut cfg = config(sh("sleep 5"));
    cfg.timeout = Duration::from_millis(200);
    let mut s = BridgeSession::start(cfg).unwrap();
    let start = Instant::now();
    match s.initial_state("t_id") {
        Err(EnvError::Infrastructure(msg)) => assert!(msg.contains("did not answer"), "{msg}"),
        other => panic!("expected timeout, got {other:?}"),
    }
    assert!(start.elapsed() < Duration::from_secs(3));
}

#[test]
fn restart_replays_state_history() {
    // The first adapter process dies after three requests; the session
    // restarts it and rebuilds the state it needs from recorded origins.
    let dir = tempfile::tempdir().unwrap();
    let marker = dir.path().join("started");
    let bin = &adapter()[0];
    let script = format!(
        "if [ -e '{m}' ]; then exec '{bin}'; fi; touch '{m}'; \
         i=0; while [ $i -lt 3 ] && read -r l; do echo \"$l\"; i=$((i+1)); done | '{bin}'",
        m = marker.display()
    );
    let mut cfg = config(sh(&script));
    cfg.max_restarts = 2;
    let mut s = BridgeSession::start(cfg).unwrap();
    let root = s.initial_state("t_const").unwrap();
    let a = s.apply_tactic(&root, &t("intro h")).unwrap();
    let b = s.apply_tactic(&a, &t("intro h1")).unwrap();
    let c = s.apply_tactic(&b, &t("exact h")).unwrap();
    assert!(is_qed(&c));
    assert_eq!(s.restarts(), 1);
}

#[test]
fn unknown_theorem_is_reported_as_such() {
    let mut s = BridgeSession::start(config(adapter())).unwrap();
    assert_eq!(
        s.initial_state("nope"),
        Err(EnvError::UnknownTheorem("nope".into()))
    );
}
