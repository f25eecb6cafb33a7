use std::collections::HashMap;
use std::process::ExitStatus;
use std::time::Duration;

use super::process::AdapterProcess;
use super::protocol::{encode, Request, Response, Status};
use super::BridgeError;
use crate::proof::{EnvError, ProofEnvironment, ProofState, Tactic};

#[derive(Debug, Clone)]
pub struct BridgeConfig {
    /// Program and arguments launching the adapter.
    pub command: Vec<String>,
    pub timeout: Duration,
    /// Adapter restarts allowed over the session's lifetime.
    pub max_restarts: u32,
}

impl BridgeConfig {
    pub fn new(command: Vec<String>) -> Self {
        Self {
            command,
            timeout: Duration::from_secs(30),
            max_restarts: 1,
        }
    }
}

/// How a state was first reached, so it can be rebuilt after a restart.
#[derive(Debug, Clone)]
enum Origin {
    Init(String),
    Apply(ProofState, Tactic),
}

/// [`ProofEnvironment`] backed by an adapter process speaking the bridge
/// protocol. Requests are strictly sequential.
pub struct BridgeSession {
    config: BridgeConfig,
    process: Option<AdapterProcess>,
    next_id: u64,
    restarts: u32,
    ids: HashMap<ProofState, String>,
    origins: HashMap<ProofState, Origin>,
}

impl BridgeSession {
    pub fn start(config: BridgeConfig) -> Result<Self, BridgeError> {
        if config.timeout.is_zero() {
            return Err(BridgeError::Spawn("timeout must be positive".into()));
        }
        let process = AdapterProcess::spawn(&config.command)?;
        Ok(Self {
            config,
            process: Some(process),
            next_id: 1,
            restarts: 0,
            ids: HashMap::new(),
            origins: HashMap::new(),
        })
    }

    pub fn restarts(&self) -> u32 {
        self.restarts
    }

    fn request(&mut self, make: impl FnOnce(u64) -> Request) -> Result<Response, BridgeError> {
        if self.process.is_none() {
            self.process = Some(AdapterProcess::spawn(&self.config.command)?);
        }
        let id = self.next_id;
        self.next_id += 1;
        let proc = self.process.as_mut().expect("spawned above");
        let outcome = proc
            .send_line(&encode(&make(id)))
            .and_then(|_| proc.recv_line(self.config.timeout));
        let parsed = outcome.and_then(|line| {
            let resp: Response =
                serde_json::from_str(&line).map_err(|e| BridgeError::Malformed {
                    line: line.clone(),
                    reason: e.to_string(),
                })?;
            if resp.id != id {
                return Err(BridgeError::IdMismatch {
                    expected: id,
                    got: resp.id,
                });
            }
            Ok(resp)
        });
        if parsed.is_err() {
            // The stream can no longer be trusted to be in step.
            if let Some(mut p) = self.process.take() {
                p.kill();
            }
        }
        parsed
    }

    fn restart(&mut self) {
        log::warn!("restarting bridge adapter ({} so far)", self.restarts);
        if let Some(mut p) = self.process.take() {
            p.kill();
        }
        self.ids.clear();
        self.restarts += 1;
    }

    fn retrying<T>(
        &mut self,
        mut op: impl FnMut(&mut Self) -> Result<T, BridgeError>,
    ) -> Result<T, BridgeError> {
        loop {
            match op(self) {
                Err(e) if e.is_transient() && self.restarts < self.config.max_restarts => {
                    log::warn!("bridge failure: {e}");
                    self.restart();
                }
                other => return other,
            }
        }
    }

    fn register(
        &mut self,
        state: &ProofState,
        id: Option<String>,
        origin: Origin,
    ) -> Result<(), BridgeError> {
        let id = match id {
            Some(id) => id,
            None if state.obligations().is_empty() => return Ok(()),
            None => return Err(BridgeError::Protocol("response lacks state_id".into())),
        };
        self.ids.insert(state.clone(), id);
        self.origins.entry(state.clone()).or_insert(origin);
        Ok(())
    }

    fn obligations_of(resp: &Response) -> Result<ProofState, BridgeError> {
        match resp.status {
            Status::Qed => Ok(ProofState::qed()),
            _ => resp
                .obligations
                .clone()
                .map(ProofState::Obligations)
                .ok_or_else(|| BridgeError::Protocol("ok response lacks obligations".into())),
        }
    }

    fn init(&mut self, theorem: &str) -> Result<Result<ProofState, String>, BridgeError> {
        let resp = self.request(|id| Request::init(id, theorem))?;
        if resp.status == Status::Error {
            return Ok(Err(resp.message.unwrap_or_default()));
        }
        let state = Self::obligations_of(&resp)?;
        self.register(&state, resp.state_id, Origin::Init(theorem.to_string()))?;
        Ok(Ok(state))
    }

    fn resolve(&mut self, state: &ProofState) -> Result<String, BridgeError> {
        if let Some(id) = self.ids.get(state) {
            return Ok(id.clone());
        }
        let origin =
            self.origins.get(state).cloned().ok_or_else(|| {
                BridgeError::Protocol("state was not issued by this session".into())
            })?;
        let rebuilt = match origin {
            Origin::Init(theorem) => self.init(&theorem)?.map_err(BridgeError::Protocol)?,
            Origin::Apply(parent, tactic) => self.apply_once(&parent, &tactic)?,
        };
        if &rebuilt != state {
            return Err(BridgeError::Protocol(
                "adapter is not deterministic across restarts".into(),
            ));
        }
        self.ids
            .get(state)
            .cloned()
            .ok_or_else(|| BridgeError::Protocol("replayed state has no id".into()))
    }

    fn apply_once(
        &mut self,
        state: &ProofState,
        tactic: &Tactic,
    ) -> Result<ProofState, BridgeError> {
        let sid = self.resolve(state)?;
        let resp = self.request(|id| Request::apply(id, &sid, tactic.as_str()))?;
        if resp.status == Status::Error {
            let message = resp.message.unwrap_or_default();
            return Ok(state.clone().into_error(message));
        }
        let next = Self::obligations_of(&resp)?;
        self.register(
            &next,
            resp.state_id,
            Origin::Apply(state.clone(), tactic.clone()),
        )?;
        Ok(next)
    }

    /// Asks the adapter to exit and waits for it.
    pub fn shutdown(&mut self) -> Result<ExitStatus, BridgeError> {
        let resp = self.request(Request::shutdown)?;
        if resp.status != Status::Ok {
            return Err(BridgeError::Protocol(format!(
                "shutdown answered {:?}",
                resp.status
            )));
        }
        let timeout = self.config.timeout;
        let mut p = self.process.take().ok_or(BridgeError::Closed)?;
        p.wait(timeout)
    }
}

impl Drop for BridgeSession {
    fn drop(&mut self) {
        if self.process.is_some() {
            let _ = self.shutdown();
        }
    }
}

impl ProofEnvironment for BridgeSession {
    fn initial_state(&mut self, theorem: &str) -> Result<ProofState, EnvError> {
        match self.retrying(|s| s.init(theorem)) {
            Ok(Ok(state)) => Ok(state),
            Ok(Err(message)) => {
                log::debug!("adapter rejected theorem '{theorem}': {message}");
                Err(EnvError::UnknownTheorem(theorem.to_string()))
            }
            Err(e) => Err(EnvError::Infrastructure(e.to_string())),
        }
    }

    fn apply_tactic(
        &mut self,
        state: &ProofState,
        tactic: &Tactic,
    ) -> Result<ProofState, EnvError> {
        if state.is_error() {
            return Ok(state.clone());
        }
        self.retrying(|s| s.apply_once(state, tactic))
            .map_err(|e| EnvError::Infrastructure(e.to_string()))
    }
}
