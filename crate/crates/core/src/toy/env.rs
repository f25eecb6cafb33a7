use std::collections::BTreeMap;
use std::sync::Arc;

use crate::proof::{EnvError, Obligation, ProofEnvironment, ProofState, Tactic};

use super::suite::{ToySuite, ToyTheorem};
use super::tactic::{parse_toy_tactic, Direction, ToyTactic};
use super::term::{Expr, Term};

/// Tactic-based prover over [`Term`]s. Tactics act on the first obligation.
///
/// The lemma scope is fixed per theorem: [`ProofEnvironment::initial_state`]
/// switches it to the lemmas the theorem references.
#[derive(Debug, Clone)]
pub struct ToyEnv {
    theorems: Arc<BTreeMap<String, ToyTheorem>>,
    lemmas: BTreeMap<String, Term>,
}

impl ToyEnv {
    pub fn new(suite: &ToySuite) -> Self {
        Self {
            theorems: Arc::new(
                suite
                    .theorems()
                    .iter()
                    .map(|t| (t.name.clone(), t.clone()))
                    .collect(),
            ),
            lemmas: BTreeMap::new(),
        }
    }

    pub fn for_theorem(theorem: &ToyTheorem) -> Self {
        let mut theorems = BTreeMap::new();
        theorems.insert(theorem.name.clone(), theorem.clone());
        Self {
            theorems: Arc::new(theorems),
            lemmas: theorem.lemmas.iter().cloned().collect(),
        }
    }

    pub fn lemmas(&self) -> &BTreeMap<String, Term> {
        &self.lemmas
    }

    /// Pure transition on tactic text.
    pub fn step(&self, state: &ProofState, text: &str) -> ProofState {
        if state.is_error() {
            return state.clone();
        }
        match parse_toy_tactic(text) {
            Ok(tac) => self.step_parsed(state, &tac),
            Err(e) => state.clone().into_error(e.to_string()),
        }
    }

    pub fn step_parsed(&self, state: &ProofState, tac: &ToyTactic) -> ProofState {
        if state.is_error() {
            return state.clone();
        }
        let obs = state.obligations();
        let Some((first, rest)) = obs.split_first() else {
            return state.clone().into_error("no goals to prove");
        };
        match self.reduce(first, tac) {
            Ok(mut replaced) => {
                replaced.extend(rest.iter().cloned());
                ProofState::Obligations(replaced)
            }
            Err(msg) => state.clone().into_error(msg),
        }
    }

    fn lookup(&self, ob: &Obligation, name: &str) -> Option<Result<Term, String>> {
        if let Some(p) = ob.hypothesis(name) {
            return Some(
                Term::parse(p).map_err(|e| format!("hypothesis '{name}' is not a toy term: {e}")),
            );
        }
        self.lemmas.get(name).cloned().map(Ok)
    }

    fn reduce(&self, ob: &Obligation, tac: &ToyTactic) -> Result<Vec<Obligation>, String> {
        let goal = Term::parse(ob.goal()).map_err(|e| format!("goal is not a toy term: {e}"))?;
        let hyp_matches_goal = |name: &str| {
            ob.hypothesis(name)
                .and_then(|p| Term::parse(p).ok())
                .is_some_and(|t| t == goal)
        };
        match tac {
            ToyTactic::Intro(name) => {
                let Term::Implies(a, b) = goal else {
                    return Err("intro failed: goal is not an implication".into());
                };
                let mut next = ob.with_goal(b.to_string());
                next.add_hypothesis(name.clone(), a.to_string())
                    .map_err(|_| format!("intro failed: name '{name}' is already in use"))?;
                Ok(vec![next])
            }
            ToyTactic::Split => {
                let Term::And(a, b) = goal else {
                    return Err("split failed: goal is not a conjunction".into());
                };
                Ok(vec![
                    ob.with_goal(a.to_string()),
                    ob.with_goal(b.to_string()),
                ])
            }
            ToyTactic::Assumption => {
                let found = ob.hypotheses().any(|(n, _)| hyp_matches_goal(n));
                if found {
                    Ok(vec![])
                } else {
                    Err("assumption failed: no hypothesis matches the goal".into())
                }
            }
            ToyTactic::Exact(name) => {
                if !ob.has_hypothesis(name) {
                    return Err(format!("exact failed: unknown hypothesis '{name}'"));
                }
                if hyp_matches_goal(name) {
                    Ok(vec![])
                } else {
                    Err(format!("exact failed: '{name}' does not match the goal"))
                }
            }
            ToyTactic::Refl => match goal {
                Term::Eq(l, r) if l == r => Ok(vec![]),
                Term::Eq(..) => Err("refl failed: sides are not syntactically equal".into()),
                _ => Err("refl failed: goal is not an equality".into()),
            },
            ToyTactic::Rw(name, dir) => {
                let eq = match self.lookup(ob, name) {
                    None => return Err(format!("rw failed: unknown equation '{name}'")),
                    Some(r) => r?,
                };
                let Term::Eq(l, r) = eq else {
                    return Err(format!("rw failed: '{name}' is not an equation"));
                };
                let (from, to): (&Expr, &Expr) = match dir {
                    Direction::LeftToRight => (&l, &r),
                    Direction::RightToLeft => (&r, &l),
                };
                let (rewritten, count) = goal.rewrite(from, to);
                if count == 0 {
                    return Err("rw failed: pattern not found in goal".into());
                }
                Ok(vec![ob.with_goal(rewritten.to_string())])
            }
            ToyTactic::Apply(name) => {
                let fact = match self.lookup(ob, name) {
                    None => {
                        return Err(format!(
                            "apply failed: unknown lemma or hypothesis '{name}'"
                        ))
                    }
                    Some(r) => r?,
                };
                if fact == goal {
                    return Ok(vec![]);
                }
                match fact {
                    Term::Implies(a, b) if *b == goal => Ok(vec![ob.with_goal(a.to_string())]),
                    _ => Err(format!("apply failed: '{name}' does not conclude the goal")),
                }
            }
        }
    }
}

impl ProofEnvironment for ToyEnv {
    fn initial_state(&mut self, theorem: &str) -> Result<ProofState, EnvError> {
        let th = self
            .theorems
            .get(theorem)
            .ok_or_else(|| EnvError::UnknownTheorem(theorem.to_string()))?;
        self.lemmas = th.lemmas.iter().cloned().collect();
        Ok(th.initial_state())
    }

    fn apply_tactic(
        &mut self,
        state: &ProofState,
        tactic: &Tactic,
    ) -> Result<ProofState, EnvError> {
        Ok(self.step(state, tactic.as_str()))
    }

    fn tactic_alphabet(&self) -> String {
        "intro NAME | split | assumption | exact NAME | refl | rw [←] NAME | apply NAME".into()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::proof::{is_qed, lift_transition};

    fn env_with(lemmas: &[(&str, &str)]) -> ToyEnv {
        let th = ToyTheorem::new("t", Term::atom("P")).with_lemmas(
            lemmas
                .iter()
                .map(|(n, s)| (n.to_string(), Term::parse(s).unwrap())),
        );
        ToyEnv::for_theorem(&th)
    }

    fn state(goal: &str, hyps: &[(&str, &str)]) -> ProofState {
        ProofState::single(Obligation::with_hypotheses(goal, hyps.iter().copied()).unwrap())
    }

    #[test]
    fn intro_moves_premise_into_hypotheses() {
        let env = env_with(&[]);
        let next = env.step(&state("P -> Q", &[]), "intro h");
        assert_eq!(next, state("Q", &[("h", "P")]));
    }

    #[test]
    fn exact_discharges() {
        let env = env_with(&[]);
        assert!(is_qed(&env.step(&state("P", &[("h", "P")]), "exact h")));
    }

    #[test]
    fn refl_requires_syntactic_equality() {
        let env = env_with(&[]);
        let out = env.step(&state("a = b", &[("h", "a = b")]), "refl");
        let msg = out.error_message().unwrap();
        assert!(msg.contains("refl failed"), "{msg}");
        assert_eq!(
            out.obligations(),
            state("a = b", &[("h", "a = b")]).obligations()
        );
        assert!(is_qed(&env.step(&state("a = a", &[]), "refl")));
    }

    #[test]
    fn lift_two_steps_to_qed() {
        let mut env = env_with(&[]);
        let tactics = [
            Tactic::new("intro h").unwrap(),
            Tactic::new("exact h").unwrap(),
        ];
        let end = lift_transition(&mut env, &state("P -> P", &[]), &tactics).unwrap();
        assert!(is_qed(&end));
    }

    #[test]
    fn split_focuses_left_then_right() {
        let env = env_with(&[]);
        let s = state("P /\\ Q", &[("hp", "P"), ("hq", "Q")]);
        let s = env.step(&s, "split");
        assert_eq!(s.obligations().len(), 2);
        assert_eq!(s.obligations()[0].goal(), "P");
        let s = env.step(&s, "exact hp");
        assert_eq!(s.obligations()[0].goal(), "Q");
        assert!(is_qed(&env.step(&s, "assumption")));
    }

    #[test]
    fn rewrite_both_directions() {
        let env = env_with(&[("comm", "a + b = b + a")]);
        let s = state("a + b = c", &[("h", "c = b + a")]);
        assert_eq!(env.step(&s, "rw comm").obligations()[0].goal(), "b + a = c");
        let s2 = state("b + a = c", &[]);
        assert_eq!(
            env.step(&s2, "rw ← comm").obligations()[0].goal(),
            "a + b = c"
        );
        let miss = env.step(&state("x = y", &[]), "rw comm");
        assert_eq!(
            miss.error_message(),
            Some("rw failed: pattern not found in goal")
        );
        let not_eq = env.step(&state("x = y", &[("p", "P")]), "rw p");
        assert_eq!(
            not_eq.error_message(),
            Some("rw failed: 'p' is not an equation")
        );
    }

    #[test]
    fn apply_backward_chains() {
        let env = env_with(&[("pq", "P -> Q"), ("q", "Q")]);
        assert_eq!(env.step(&state("Q", &[]), "apply pq"), state("P", &[]));
        assert!(is_qed(&env.step(&state("Q", &[]), "apply q")));
        let e = env.step(&state("R", &[]), "apply pq");
        assert_eq!(
            e.error_message(),
            Some("apply failed: 'pq' does not conclude the goal")
        );
    }

    #[test]
    fn errors_are_absorbing_and_parse_errors_become_feedback() {
        let env = env_with(&[]);
        let e = env.step(&state("P", &[]), "linarith");
        assert!(e.error_message().unwrap().contains("unknown tactic"));
        for t in ["intro h", "refl", "split", "exact h"] {
            assert_eq!(env.step(&e, t), e);
        }
        assert_eq!(
            env.step(&ProofState::qed(), "refl").error_message(),
            Some("no goals to prove")
        );
    }

    #[test]
    fn intro_name_clash() {
        let env = env_with(&[]);
        let e = env.step(&state("P -> Q", &[("h", "R")]), "intro h");
        assert_eq!(
            e.error_message(),
            Some("intro failed: name 'h' is already in use")
        );
    }
}
