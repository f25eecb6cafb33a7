//! Model-guided, backtracking proof search over tactic-based proof
//! environments.

pub mod agent;
pub mod bridge;
pub mod llm;
pub mod prompt;
pub mod proof;
pub mod retrieval;
pub mod toy;
