//! A small self-contained tactic prover and its brute-force oracle.

mod env;
mod oracle;
mod suite;
mod tactic;
mod term;

pub use env::ToyEnv;
pub use oracle::{brute_force_prove, candidate_tactics, fresh_intro_name, oracle_backend};
pub use suite::{SuiteError, ToySuite, ToyTheorem, BUNDLED_SUITE};
pub use tactic::{parse_toy_tactic, Direction, TacticParseError, ToyTactic};
pub use term::{Expr, Term, TermParseError};
