use serde::{Deserialize, Serialize};

use crate::proof::Obligation;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Command {
    Init,
    Apply,
    Reset,
    Shutdown,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Request {
    pub id: u64,
    pub cmd: Command,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub theorem: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub state_id: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tactic: Option<String>,
}

impl Request {
    fn bare(id: u64, cmd: Command) -> Self {
        Self {
            id,
            cmd,
            theorem: None,
            state_id: None,
            tactic: None,
        }
    }

    pub fn init(id: u64, theorem: &str) -> Self {
        Self {
            theorem: Some(theorem.into()),
            ..Self::bare(id, Command::Init)
        }
    }

    pub fn apply(id: u64, state_id: &str, tactic: &str) -> Self {
        Self {
            state_id: Some(state_id.into()),
            tactic: Some(tactic.into()),
            ..Self::bare(id, Command::Apply)
        }
    }

    pub fn reset(id: u64) -> Self {
        Self::bare(id, Command::Reset)
    }

    pub fn shutdown(id: u64) -> Self {
        Self::bare(id, Command::Shutdown)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Ok,
    Error,
    Qed,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Response {
    pub id: u64,
    pub status: Status,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub state_id: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub obligations: Option<Vec<Obligation>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub message: Option<String>,
}

impl Response {
    pub fn ok(id: u64) -> Self {
        Self {
            id,
            status: Status::Ok,
            state_id: None,
            obligations: None,
            message: None,
        }
    }

    pub fn state(id: u64, state_id: String, obligations: Vec<Obligation>) -> Self {
        Self {
            state_id: Some(state_id),
            obligations: Some(obligations),
            ..Self::ok(id)
        }
    }

    pub fn qed(id: u64, state_id: String) -> Self {
        Self {
            status: Status::Qed,
            state_id: Some(state_id),
            obligations: Some(Vec::new()),
            ..Self::ok(id)
        }
    }

    pub fn error(id: u64, message: impl Into<String>) -> Self {
        Self {
            status: Status::Error,
            message: Some(message.into()),
            ..Self::ok(id)
        }
    }
}

pub fn encode<T: Serialize>(msg: &T) -> String {
    serde_json::to_string(msg).expect("protocol messages always serialize")
}
