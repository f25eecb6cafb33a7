//! Line-delimited JSON protocol for driving external provers as
//! [`ProofEnvironment`](crate::proof::ProofEnvironment)s.
//!
//! The wire format is documented in `docs/bridge-protocol.md`.

mod conformance;
mod process;
pub mod protocol;
mod session;
pub mod stub;

use std::time::Duration;

use thiserror::Error;

pub use conformance::{
    differential_toy, error_states_are_absorbing, run_conformance, CheckResult, ConformanceProbe,
};
pub use process::AdapterProcess;
pub use session::{BridgeConfig, BridgeSession};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum BridgeError {
    #[error("cannot start adapter: {0}")]
    Spawn(String),
    #[error("adapter did not answer within {0:?}")]
    Timeout(Duration),
    #[error("adapter crashed: {0}")]
    Crashed(String),
    #[error("adapter connection is closed")]
    Closed,
    #[error("malformed response line '{line}': {reason}")]
    Malformed { line: String, reason: String },
    #[error("response id {got} does not match request id {expected}")]
    IdMismatch { expected: u64, got: u64 },
    #[error("protocol violation: {0}")]
    Protocol(String),
}

impl BridgeError {
    /// Failures a fresh adapter process might not repeat.
    pub fn is_transient(&self) -> bool {
        matches!(
            self,
            BridgeError::Timeout(_) | BridgeError::Crashed(_) | BridgeError::Closed
        )
    }
}
