//! Protocol conformance checks runnable against any adapter command.

use std::collections::{HashSet, VecDeque};
use std::fmt;
use std::time::Duration;

use super::process::AdapterProcess;
use super::protocol::{encode, Request, Response, Status};
use super::session::BridgeConfig;
use crate::proof::{ProofEnvironment, ProofState, Tactic};
use crate::toy::{candidate_tactics, ToyEnv, ToySuite};

/// Adapter-specific inputs the checks need.
#[derive(Debug, Clone)]
pub struct ConformanceProbe {
    pub theorem: String,
    /// A tactic that succeeds on the theorem's initial state.
    pub progress_tactic: String,
    /// A tactic that fails on the theorem's initial state.
    pub failing_tactic: String,
    pub unknown_theorem: String,
}

impl ConformanceProbe {
    /// Inputs suited to the bundled toy suite.
    pub fn toy() -> Self {
        Self {
            theorem: "t_id".into(),
            progress_tactic: "intro h".into(),
            failing_tactic: "split".into(),
            unknown_theorem: "no_such_theorem".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CheckResult {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

impl fmt::Display for CheckResult {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mark = if self.passed { "PASS" } else { "FAIL" };
        write!(f, "{mark} {}", self.name)?;
        if !self.detail.is_empty() {
            write!(f, ": {}", self.detail)?;
        }
        Ok(())
    }
}

struct Wire {
    proc: AdapterProcess,
    timeout: Duration,
    next: u64,
}

impl Wire {
    fn id(&mut self) -> u64 {
        self.next += 1;
        self.next
    }

    fn read(&mut self) -> Result<Response, String> {
        let line = self
            .proc
            .recv_line(self.timeout)
            .map_err(|e| e.to_string())?;
        serde_json::from_str(&line).map_err(|e| format!("malformed response line '{line}': {e}"))
    }

    fn call(&mut self, make: impl FnOnce(u64) -> Request) -> Result<Response, String> {
        let id = self.id();
        self.proc
            .send_line(&encode(&make(id)))
            .map_err(|e| e.to_string())?;
        let r = self.read()?;
        if r.id != id {
            return Err(format!(
                "response id {} does not echo request id {id}",
                r.id
            ));
        }
        Ok(r)
    }
}

fn check(name: &'static str, outcome: Result<(), String>) -> CheckResult {
    match outcome {
        Ok(()) => CheckResult {
            name,
            passed: true,
            detail: String::new(),
        },
        Err(detail) => CheckResult {
            name,
            passed: false,
            detail,
        },
    }
}

fn expect(cond: bool, msg: impl Into<String>) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg.into())
    }
}

/// Runs every check against a fresh adapter process. Checks run in order on
/// one process; a failure early on may cause later checks to fail too.
pub fn run_conformance(config: &BridgeConfig, probe: &ConformanceProbe) -> Vec<CheckResult> {
    let proc = match AdapterProcess::spawn(&config.command) {
        Ok(p) => p,
        Err(e) => return vec![check("spawn", Err(e.to_string()))],
    };
    let mut w = Wire {
        proc,
        timeout: config.timeout,
        next: 0,
    };
    let mut out = Vec::new();

    let mut root: Option<String> = None;
    out.push(check(
        "init_known_theorem",
        (|| {
            let r = w.call(|id| Request::init(id, &probe.theorem))?;
            expect(r.status == Status::Ok, format!("status {:?}", r.status))?;
            expect(
                r.obligations.as_ref().is_some_and(|o| !o.is_empty()),
                "missing obligations",
            )?;
            root = Some(r.state_id.ok_or("missing state_id")?);
            Ok(())
        })(),
    ));
    let root = root.unwrap_or_else(|| "s-missing".into());

    out.push(check(
        "init_unknown_theorem",
        (|| {
            let r = w.call(|id| Request::init(id, &probe.unknown_theorem))?;
            expect(r.status == Status::Error, format!("status {:?}", r.status))?;
            expect(
                r.message.is_some_and(|m| !m.is_empty()),
                "error without message",
            )
        })(),
    ));

    let mut first = None;
    out.push(check(
        "apply_progress",
        (|| {
            let r = w.call(|id| Request::apply(id, &root, &probe.progress_tactic))?;
            expect(r.status != Status::Error, format!("error: {:?}", r.message))?;
            let sid = r.state_id.clone().ok_or("missing state_id")?;
            expect(sid != root, "child state reuses the parent id")?;
            first = Some(r.obligations.ok_or("missing obligations")?);
            Ok(())
        })(),
    ));

    out.push(check(
        "apply_failure",
        (|| {
            let r = w.call(|id| Request::apply(id, &root, &probe.failing_tactic))?;
            expect(r.status == Status::Error, format!("status {:?}", r.status))?;
            expect(
                r.message.is_some_and(|m| !m.is_empty()),
                "error without message",
            )
        })(),
    ));

    out.push(check(
        "apply_is_deterministic",
        (|| {
            let r = w.call(|id| Request::apply(id, &root, &probe.progress_tactic))?;
            expect(
                first.is_some() && r.obligations == first,
                "re-applying a tactic to the same state gave a different result",
            )
        })(),
    ));

    out.push(check(
        "unknown_state_id",
        (|| {
            let r = w.call(|id| Request::apply(id, "no-such-state", &probe.progress_tactic))?;
            expect(r.status == Status::Error, format!("status {:?}", r.status))
        })(),
    ));

    out.push(check(
        "ids_echoed_in_order",
        (|| {
            let ids: Vec<u64> = (0..5).map(|_| w.id()).collect();
            for &id in &ids {
                let req = Request::apply(id, &root, &probe.failing_tactic);
                w.proc.send_line(&encode(&req)).map_err(|e| e.to_string())?;
            }
            for &id in &ids {
                let r = w.read()?;
                expect(r.id == id, format!("expected id {id}, got {}", r.id))?;
            }
            Ok(())
        })(),
    ));

    out.push(check(
        "malformed_request",
        (|| {
            w.proc
                .send_line("this is not json")
                .map_err(|e| e.to_string())?;
            let r = w.read()?;
            expect(
                r.status == Status::Error,
                "malformed request not answered with an error",
            )?;
            let r = w.call(|id| Request::apply(id, &root, &probe.failing_tactic))?;
            expect(
                r.status == Status::Error,
                "adapter stopped serving after a malformed line",
            )
        })(),
    ));

    out.push(check(
        "reset_forgets_states",
        (|| {
            let r = w.call(Request::reset)?;
            expect(r.status == Status::Ok, format!("status {:?}", r.status))?;
            let r = w.call(|id| Request::apply(id, &root, &probe.progress_tactic))?;
            expect(r.status == Status::Error, "state id survived reset")
        })(),
    ));

    out.push(check(
        "shutdown_exits_cleanly",
        (|| {
            let r = w.call(Request::shutdown)?;
            expect(r.status == Status::Ok, format!("status {:?}", r.status))?;
            let status = w.proc.wait(config.timeout).map_err(|e| e.to_string())?;
            expect(status.success(), format!("exit status {status}"))
        })(),
    ));

    out
}

/// Tactics that are wrong almost everywhere, to exercise error paths.
const NOISE_TACTICS: [&str; 4] = ["linarith", "rw no_such_lemma", "exact nope", "intro"];

/// Explores every toy theorem breadth-first to `max_depth`, applying each
/// candidate tactic through both `env` and a direct [`ToyEnv`], and fails on
/// the first disagreement. Returns the number of pairs compared.
pub fn differential_toy(
    suite: &ToySuite,
    env: &mut dyn ProofEnvironment,
    max_depth: usize,
) -> Result<usize, String> {
    let mut compared = 0;
    for th in suite.theorems() {
        let mut direct = ToyEnv::new(suite);
        let a = direct.initial_state(&th.name).map_err(|e| e.to_string())?;
        let b = env.initial_state(&th.name).map_err(|e| e.to_string())?;
        if a != b {
            return Err(format!(
                "{}: initial states differ: {a:?} vs {b:?}",
                th.name
            ));
        }
        let mut seen = HashSet::from([a.clone()]);
        let mut queue = VecDeque::from([(a, 0)]);
        while let Some((state, depth)) = queue.pop_front() {
            let mut tactics: Vec<String> = candidate_tactics(&direct, &state)
                .iter()
                .map(ToString::to_string)
                .collect();
            tactics.extend(NOISE_TACTICS.iter().map(|t| t.to_string()));
            for text in tactics {
                let tac = Tactic::new(&text).expect("non-empty");
                let want = direct
                    .apply_tactic(&state, &tac)
                    .map_err(|e| e.to_string())?;
                let got = env.apply_tactic(&state, &tac).map_err(|e| e.to_string())?;
                compared += 1;
                if want != got {
                    return Err(format!(
                        "{}: '{text}' at {state:?}: direct {want:?}, bridged {got:?}",
                        th.name
                    ));
                }
                let fresh = !want.is_error() && !want.obligations().is_empty();
                if fresh && depth + 1 < max_depth && seen.insert(want.clone()) {
                    queue.push_back((want, depth + 1));
                }
            }
        }
    }
    Ok(compared)
}

/// Same shape check on an error state: must come back unchanged.
pub fn error_states_are_absorbing(env: &mut dyn ProofEnvironment) -> Result<(), String> {
    let st = ProofState::error(vec![], "earlier failure");
    let out = env
        .apply_tactic(&st, &Tactic::new("intro h").expect("non-empty"))
        .map_err(|e| e.to_string())?;
    expect(out == st, "error state was not returned unchanged")
}
