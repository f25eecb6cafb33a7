//! Loopback adapter serving the toy prover over the bridge protocol.

use std::collections::HashMap;
use std::io::{self, BufRead, Write};
use std::rc::Rc;

use serde_json::Value;

use super::protocol::{encode, Command, Request, Response};
use crate::proof::{ProofEnvironment, ProofState, Tactic};
use crate::toy::{ToyEnv, ToySuite};

struct Server {
    base: ToyEnv,
    envs: HashMap<String, Rc<ToyEnv>>,
    states: Vec<(ProofState, Rc<ToyEnv>)>,
}

impl Server {
    fn issue(&mut self, state: ProofState, env: Rc<ToyEnv>) -> String {
        self.states.push((state, env));
        format!("s{}", self.states.len())
    }

    fn lookup(&self, state_id: &str) -> Option<(ProofState, Rc<ToyEnv>)> {
        let n: usize = state_id.strip_prefix('s')?.parse().ok()?;
        self.states.get(n.checked_sub(1)?).cloned()
    }

    fn handle(&mut self, req: Request) -> Response {
        let id = req.id;
        match req.cmd {
            Command::Init => {
                let Some(theorem) = req.theorem else {
                    return Response::error(id, "init requires a theorem");
                };
                let mut env = self.base.clone();
                match env.initial_state(&theorem) {
                    Ok(state) => {
                        let env = self
                            .envs
                            .entry(theorem)
                            .or_insert_with(|| Rc::new(env))
                            .clone();
                        let obs = state.obligations().to_vec();
                        let sid = self.issue(state, env);
                        Response::state(id, sid, obs)
                    }
                    Err(e) => Response::error(id, e.to_string()),
                }
            }
            Command::Apply => {
                let (Some(sid), Some(text)) = (req.state_id, req.tactic) else {
                    return Response::error(id, "apply requires state_id and tactic");
                };
                let Some((state, env)) = self.lookup(&sid) else {
                    return Response::error(id, format!("unknown state_id '{sid}'"));
                };
                let Ok(tactic) = Tactic::new(&text) else {
                    return Response::error(id, "tactic text is empty");
                };
                let next = env.step(&state, tactic.as_str());
                if let Some(msg) = next.error_message() {
                    return Response::error(id, msg);
                }
                let obs = next.obligations().to_vec();
                let qed = obs.is_empty();
                let new_id = self.issue(next, env);
                if qed {
                    Response::qed(id, new_id)
                } else {
                    Response::state(id, new_id, obs)
                }
            }
            Command::Reset => {
                self.states.clear();
                self.envs.clear();
                Response::ok(id)
            }
            Command::Shutdown => Response::ok(id),
        }
    }
}

/// Serves requests until `shutdown` or end of input.
pub fn serve(reader: impl BufRead, mut writer: impl Write, suite: &ToySuite) -> io::Result<()> {
    let mut server = Server {
        base: ToyEnv::new(suite),
        envs: HashMap::new(),
        states: Vec::new(),
    };
    for line in reader.lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let (resp, stop) = match serde_json::from_str::<Request>(&line) {
            Ok(req) => {
                let stop = req.cmd == Command::Shutdown;
                (server.handle(req), stop)
            }
            Err(e) => {
                let id = serde_json::from_str::<Value>(&line)
                    .ok()
                    .and_then(|v| v.get("id").and_then(Value::as_u64))
                    .unwrap_or(0);
                (
                    Response::error(id, format!("malformed request: {e}")),
                    false,
                )
            }
        };
        writeln!(writer, "{}", encode(&resp))?;
        writer.flush()?;
        if stop {
            break;
        }
    }
    Ok(())
}
