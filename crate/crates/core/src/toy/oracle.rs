//! Iterative-deepening brute-force prover for toy theorems.

use std::collections::HashMap;

use crate::llm::ScriptedBackend;
use crate::prompt::render_response;
use crate::proof::{canonical_key, is_qed, ProofState};

use super::env::ToyEnv;
use super::suite::ToyTheorem;
use super::tactic::{Direction, ToyTactic};

/// Fresh name for `intro`: the first of `h`, `h1`, `h2`, ... not in use.
pub fn fresh_intro_name(state: &ProofState) -> String {
    let Some(first) = state.obligations().first() else {
        return "h".into();
    };
    std::iter::once("h".to_string())
        .chain((1..).map(|i| format!("h{i}")))
        .find(|n| !first.has_hypothesis(n))
        .expect("unbounded name supply")
}

/// Every tactic instantiated with the names in scope at `state`, in oracle
/// order.
pub fn candidate_tactics(env: &ToyEnv, state: &ProofState) -> Vec<ToyTactic> {
    let mut out = vec![
        ToyTactic::Intro(fresh_intro_name(state)),
        ToyTactic::Split,
        ToyTactic::Assumption,
        ToyTactic::Refl,
    ];
    let mut names: Vec<String> = env.lemmas().keys().cloned().collect();
    if let Some(first) = state.obligations().first() {
        for (n, _) in first.hypotheses() {
            out.push(ToyTactic::Exact(n.to_string()));
            names.push(n.to_string());
        }
    }
    names.sort();
    names.dedup();
    for n in names {
        out.push(ToyTactic::Rw(n.clone(), Direction::LeftToRight));
        out.push(ToyTactic::Rw(n.clone(), Direction::RightToLeft));
        out.push(ToyTactic::Apply(n));
    }
    out.sort();
    out
}

/// Returns a shortest proof of `theorem` no longer than `max_depth`, the
/// lexicographically smallest one under the oracle tactic order.
pub fn brute_force_prove(theorem: &ToyTheorem, max_depth: usize) -> Option<Vec<ToyTactic>> {
    assert!(max_depth >= 1, "max_depth must be at least 1");
    let env = ToyEnv::for_theorem(theorem);
    let start = theorem.initial_state();
    if is_qed(&start) {
        return Some(Vec::new());
    }
    for limit in 1..=max_depth {
        let mut dead: HashMap<ProofState, usize> = HashMap::new();
        let mut path = Vec::new();
        if search(&env, &start, limit, &mut path, &mut dead) {
            return Some(path);
        }
    }
    None
}

fn search(
    env: &ToyEnv,
    state: &ProofState,
    remaining: usize,
    path: &mut Vec<ToyTactic>,
    dead: &mut HashMap<ProofState, usize>,
) -> bool {
    if remaining == 0 {
        return false;
    }
    if dead.get(state).is_some_and(|&r| r >= remaining) {
        return false;
    }
    for tac in candidate_tactics(env, state) {
        let next = env.step_parsed(state, &tac);
        if next.is_error() {
            continue;
        }
        path.push(tac);
        if is_qed(&next) {
            if remaining == 1 {
                return true;
            }
        } else if search(env, &next, remaining - 1, path, dead) {
            return true;
        }
        path.pop();
    }
    dead.insert(state.clone(), remaining);
    false
}

/// A scripted backend that answers the first query at each state along the
/// oracle proof with that state's proof step. Anything else gets a reply
/// without a tactic.
pub fn oracle_backend(theorem: &ToyTheorem, max_depth: usize) -> Option<ScriptedBackend> {
    let proof = brute_force_prove(theorem, max_depth)?;
    let env = ToyEnv::for_theorem(theorem);
    let mut state = theorem.initial_state();
    let mut backend = ScriptedBackend::new("No further suggestions.");
    for tac in proof {
        backend = backend.at(canonical_key(&state), 1, render_response(&tac.to_string()));
        state = env.step_parsed(&state, &tac);
    }
    Some(backend)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::toy::term::Term;

    fn show(p: &[ToyTactic]) -> Vec<String> {
        p.iter().map(ToString::to_string).collect()
    }

    #[test]
    fn identity_needs_intro_then_exact() {
        let th = ToyTheorem::new("id", Term::parse("P -> P").unwrap());
        assert_eq!(
            show(&brute_force_prove(&th, 3).unwrap()),
            ["intro h", "exact h"]
        );
    }

    #[test]
    fn reflexivity_in_one_step() {
        let th = ToyTheorem::new("r", Term::parse("a = a").unwrap());
        assert_eq!(show(&brute_force_prove(&th, 1).unwrap()), ["refl"]);
    }

    #[test]
    fn bare_atom_is_unprovable() {
        let th = ToyTheorem::new("q", Term::atom("Q"));
        assert_eq!(brute_force_prove(&th, 3), None);
    }

    #[test]
    fn fresh_names_skip_used_ones() {
        let th = ToyTheorem::new("n", Term::parse("P -> P").unwrap()).with_hypotheses([
            ("h".to_string(), Term::atom("Q")),
            ("h1".to_string(), Term::atom("R")),
        ]);
        assert_eq!(fresh_intro_name(&th.initial_state()), "h2");
    }
}
