//! Abstract proof environment: obligations, states, transitions, and the
//! "at least as hard" progress order used by the search guard.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Collapses every whitespace run to a single space and trims the ends.
pub fn normalize_ws(text: &str) -> String {
    text.split_whitespace().collect::<Vec<_>>().join(" ")
}

/// A named hypothesis inside an obligation.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Hypothesis {
    pub name: String,
    pub prop: String,
}

/// A goal together with the hypotheses that may be used to prove it.
///
/// Hypotheses are keyed by name, so names are unique and equality does not
/// depend on the order in which hypotheses were supplied.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(into = "ObligationRepr", try_from = "ObligationRepr")]
pub struct Obligation {
    goal: String,
    hypotheses: BTreeMap<String, String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ObligationError {
    #[error("duplicate hypothesis name '{0}'")]
    DuplicateHypothesis(String),
    #[error("hypothesis name must not be empty")]
    EmptyHypothesisName,
}

impl Obligation {
    pub fn new(goal: impl AsRef<str>) -> Self {
        Self {
            goal: normalize_ws(goal.as_ref()),
            hypotheses: BTreeMap::new(),
        }
    }

    /// Builds an obligation, rejecting duplicate hypothesis names.
    pub fn with_hypotheses<I, N, P>(goal: impl AsRef<str>, hyps: I) -> Result<Self, ObligationError>
    where
        I: IntoIterator<Item = (N, P)>,
        N: Into<String>,
        P: AsRef<str>,
    {
        let mut ob = Self::new(goal);
        for (name, prop) in hyps {
            ob.add_hypothesis(name, prop)?;
        }
        Ok(ob)
    }

    pub fn add_hypothesis(
        &mut self,
        name: impl Into<String>,
        prop: impl AsRef<str>,
    ) -> Result<(), ObligationError> {
        let name = name.into().trim().to_string();
        if name.is_empty() {
            return Err(ObligationError::EmptyHypothesisName);
        }
        if self.hypotheses.contains_key(&name) {
            return Err(ObligationError::DuplicateHypothesis(name));
        }
        self.hypotheses.insert(name, normalize_ws(prop.as_ref()));
        Ok(())
    }

    pub fn goal(&self) -> &str {
        &self.goal
    }

    /// Hypotheses in name order.
    pub fn hypotheses(&self) -> impl Iterator<Item = (&str, &str)> + '_ {
        self.hypotheses
            .iter()
            .map(|(n, p)| (n.as_str(), p.as_str()))
    }

    pub fn hypothesis(&self, name: &str) -> Option<&str> {
        self.hypotheses.get(name).map(String::as_str)
    }

    pub fn has_hypothesis(&self, name: &str) -> bool {
        self.hypotheses.contains_key(name)
    }

    pub fn hypothesis_count(&self) -> usize {
        self.hypotheses.len()
    }

    /// Sorted, deduplicated hypothesis propositions (names dropped).
    pub fn hypothesis_props(&self) -> Vec<&str> {
        let mut props: Vec<&str> = self.hypotheses.values().map(String::as_str).collect();
        props.sort_unstable();
        props.dedup();
        props
    }

    /// `true` when every proposition assumed by `self` is also assumed by `other`.
    fn hyps_subset_of(&self, other: &Obligation) -> bool {
        let theirs = other.hypothesis_props();
        self.hypothesis_props()
            .iter()
            .all(|p| theirs.binary_search(p).is_ok())
    }

    pub fn with_goal(&self, goal: impl AsRef<str>) -> Self {
        Self {
            goal: normalize_ws(goal.as_ref()),
            hypotheses: self.hypotheses.clone(),
        }
    }
}

#[derive(Serialize, Deserialize)]
struct ObligationRepr {
    goal: String,
    hypotheses: Vec<Hypothesis>,
}

impl From<Obligation> for ObligationRepr {
    fn from(ob: Obligation) -> Self {
        Self {
            goal: ob.goal,
            hypotheses: ob
                .hypotheses
                .into_iter()
                .map(|(name, prop)| Hypothesis { name, prop })
                .collect(),
        }
    }
}

impl TryFrom<ObligationRepr> for Obligation {
    type Error = ObligationError;
    fn try_from(r: ObligationRepr) -> Result<Self, Self::Error> {
        Obligation::with_hypotheses(r.goal, r.hypotheses.into_iter().map(|h| (h.name, h.prop)))
    }
}

impl fmt::Display for Obligation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (n, p) in self.hypotheses() {
            writeln!(f, "{n} : {p}")?;
        }
        write!(f, "⊢ {}", self.goal)
    }
}

/// Position of a proof environment.
///
/// QED is the empty obligation set. Error states remember the obligations at
/// the point of failure along with the environment's feedback.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum ProofState {
    Obligations(Vec<Obligation>),
    Error {
        obligations: Vec<Obligation>,
        message: String,
    },
}

impl ProofState {
    pub fn qed() -> Self {
        ProofState::Obligations(Vec::new())
    }

    pub fn single(ob: Obligation) -> Self {
        ProofState::Obligations(vec![ob])
    }

    pub fn error(obligations: Vec<Obligation>, message: impl Into<String>) -> Self {
        ProofState::Error {
            obligations,
            message: message.into(),
        }
    }

    pub fn obligations(&self) -> &[Obligation] {
        match self {
            ProofState::Obligations(obs) => obs,
            ProofState::Error { obligations, .. } => obligations,
        }
    }

    pub fn is_error(&self) -> bool {
        matches!(self, ProofState::Error { .. })
    }

    pub fn error_message(&self) -> Option<&str> {
        match self {
            ProofState::Error { message, .. } => Some(message),
            ProofState::Obligations(_) => None,
        }
    }

    /// Turns this state into an error state carrying its obligations.
    pub fn into_error(self, message: impl Into<String>) -> Self {
        match self {
            ProofState::Obligations(obligations) => ProofState::error(obligations, message),
            err @ ProofState::Error { .. } => err,
        }
    }
}

/// `true` iff the state is a non-error state with no obligations left.
pub fn is_qed(state: &ProofState) -> bool {
    matches!(state, ProofState::Obligations(obs) if obs.is_empty())
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ProgressError {
    #[error(
        "the progress order is only defined on non-error states ({side} operand is an error state)"
    )]
    ErrorState { side: &'static str },
}

/// The progress order: `o1` is at least as hard as `o2` when every obligation
/// of `o2` has a counterpart in `o1` with the same goal and a subset of its
/// hypotheses. Goals compare by whitespace-normalized text; hypotheses compare
/// by proposition content, ignoring names.
pub fn at_least_as_hard(o1: &ProofState, o2: &ProofState) -> Result<bool, ProgressError> {
    if o1.is_error() {
        return Err(ProgressError::ErrorState { side: "left" });
    }
    if o2.is_error() {
        return Err(ProgressError::ErrorState { side: "right" });
    }
    let mut by_goal: BTreeMap<&str, Vec<&Obligation>> = BTreeMap::new();
    for ob in o1.obligations() {
        by_goal.entry(ob.goal()).or_default().push(ob);
    }
    Ok(o2.obligations().iter().all(|target| {
        by_goal
            .get(target.goal())
            .is_some_and(|cands| cands.iter().any(|c| c.hyps_subset_of(target)))
    }))
}

/// Canonical, order-independent serialization of a state.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct StateKey(String);

impl StateKey {
    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for StateKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

#[derive(Serialize)]
struct KeyRepr<'a> {
    error: Option<&'a str>,
    obligations: Vec<(&'a str, Vec<(&'a str, &'a str)>)>,
}

/// Obligations are sorted by goal text, then by their sorted hypothesis list.
/// The obligation list is treated as a multiset.
pub fn canonical_key(state: &ProofState) -> StateKey {
    let mut obligations: Vec<(&str, Vec<(&str, &str)>)> = state
        .obligations()
        .iter()
        .map(|ob| (ob.goal(), ob.hypotheses().collect()))
        .collect();
    obligations.sort();
    let repr = KeyRepr {
        error: state.error_message(),
        obligations,
    };
    StateKey(serde_json::to_string(&repr).expect("key serialization cannot fail"))
}

/// A single proof step, as text accepted by the target environment.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct Tactic(String);

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("tactic text is empty")]
pub struct EmptyTactic;

impl Tactic {
    pub fn new(text: impl AsRef<str>) -> Result<Self, EmptyTactic> {
        let t = text.as_ref().trim();
        if t.is_empty() {
            Err(EmptyTactic)
        } else {
            Ok(Tactic(t.to_string()))
        }
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl TryFrom<String> for Tactic {
    type Error = EmptyTactic;
    fn try_from(value: String) -> Result<Self, Self::Error> {
        Tactic::new(value)
    }
}

impl From<Tactic> for String {
    fn from(t: Tactic) -> String {
        t.0
    }
}

impl fmt::Display for Tactic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// Theorem statement plus optional informal guidance.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GlobalContext {
    theorem_statement: String,
    pub informal_hints: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("theorem statement must not be empty")]
pub struct EmptyStatement;

impl GlobalContext {
    pub fn new(theorem_statement: impl Into<String>) -> Result<Self, EmptyStatement> {
        let theorem_statement = theorem_statement.into();
        if theorem_statement.trim().is_empty() {
            return Err(EmptyStatement);
        }
        Ok(Self {
            theorem_statement,
            informal_hints: None,
        })
    }

    pub fn theorem_statement(&self) -> &str {
        &self.theorem_statement
    }
}

/// Failures of the environment machinery itself, as opposed to proof errors
/// (which are [`ProofState::Error`] values).
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EnvError {
    #[error("unknown theorem '{0}'")]
    UnknownTheorem(String),
    #[error("environment infrastructure failure: {0}")]
    Infrastructure(String),
}

/// A deterministic tactic-based proof environment.
pub trait ProofEnvironment {
    fn initial_state(&mut self, theorem: &str) -> Result<ProofState, EnvError>;

    /// Must be deterministic and must return error states unchanged.
    fn apply_tactic(&mut self, state: &ProofState, tactic: &Tactic)
        -> Result<ProofState, EnvError>;

    /// Informal description of the tactics this environment understands.
    fn tactic_alphabet(&self) -> String {
        String::new()
    }
}

/// Applies `tactics` left to right. The empty sequence is the identity.
pub fn lift_transition<E: ProofEnvironment + ?Sized>(
    env: &mut E,
    state: &ProofState,
    tactics: &[Tactic],
) -> Result<ProofState, EnvError> {
    let mut cur = state.clone();
    for t in tactics {
        cur = env.apply_tactic(&cur, t)?;
    }
    Ok(cur)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ob(goal: &str, hyps: &[(&str, &str)]) -> Obligation {
        Obligation::with_hypotheses(goal, hyps.iter().copied()).unwrap()
    }

    fn st(obs: Vec<Obligation>) -> ProofState {
        ProofState::Obligations(obs)
    }

    #[test]
    fn qed_definition() {
        assert!(is_qed(&ProofState::qed()));
        assert!(!is_qed(&st(vec![ob("P", &[])])));
        assert!(!is_qed(&ProofState::error(vec![ob("P", &[])], "msg")));
        assert!(!is_qed(&ProofState::error(vec![], "msg")));
    }

    #[test]
    fn duplicate_hypothesis_names_rejected() {
        let err = Obligation::with_hypotheses("P", [("h", "A"), ("h", "B")]).unwrap_err();
        assert_eq!(err, ObligationError::DuplicateHypothesis("h".into()));
    }

    #[test]
    fn obligation_wire_shape() {
        let o = ob("Q", &[("h", "P")]);
        let j = serde_json::to_string(&o).unwrap();
        assert_eq!(j, r#"{"goal":"Q","hypotheses":[{"name":"h","prop":"P"}]}"#);
        assert_eq!(serde_json::from_str::<Obligation>(&j).unwrap(), o);
        let dup = r#"{"goal":"Q","hypotheses":[{"name":"h","prop":"P"},{"name":"h","prop":"R"}]}"#;
        assert!(serde_json::from_str::<Obligation>(dup).is_err());
    }

    #[test]
    fn obligation_equality_ignores_hypothesis_order() {
        assert_eq!(
            ob("P", &[("h1", "A"), ("h2", "B")]),
            ob("P", &[("h2", "B"), ("h1", "A")])
        );
    }

    #[test]
    fn progress_order_examples() {
        let o = st(vec![ob("P", &[("h", "A")]), ob("Q", &[])]);
        assert!(at_least_as_hard(&o, &o).unwrap());
        assert!(at_least_as_hard(&o, &ProofState::qed()).unwrap());

        let o1 = st(vec![ob("g", &[])]);
        let o2 = st(vec![ob("g", &[("h1", "H")])]);
        assert!(at_least_as_hard(&o1, &o2).unwrap());
        assert!(!at_least_as_hard(&o2, &o1).unwrap());
    }

    #[test]
    fn progress_order_ignores_names_and_whitespace() {
        let o1 = st(vec![ob("a  =  b", &[("x", "A")])]);
        let o2 = st(vec![ob("a = b", &[("y", "A"), ("z", "B")])]);
        assert!(at_least_as_hard(&o1, &o2).unwrap());
    }

    #[test]
    fn progress_order_rejects_error_states() {
        let e = ProofState::error(vec![], "boom");
        let o = ProofState::qed();
        assert_eq!(
            at_least_as_hard(&e, &o),
            Err(ProgressError::ErrorState { side: "left" })
        );
        assert_eq!(
            at_least_as_hard(&o, &e),
            Err(ProgressError::ErrorState { side: "right" })
        );
    }

    #[test]
    fn canonical_key_is_order_independent() {
        let a = ob("A", &[("h1", "X"), ("h2", "Y")]);
        let b = ob("B", &[]);
        assert_eq!(
            canonical_key(&st(vec![a.clone(), b.clone()])),
            canonical_key(&st(vec![b, a]))
        );
        assert_ne!(
            canonical_key(&st(vec![ob("P", &[])])),
            canonical_key(&st(vec![ob("Q", &[])]))
        );
        assert_ne!(
            canonical_key(&st(vec![ob("P", &[])])),
            canonical_key(&ProofState::error(vec![ob("P", &[])], "w"))
        );
    }

    #[test]
    fn tactic_trims_and_rejects_empty() {
        assert_eq!(Tactic::new("  intro h \n").unwrap().as_str(), "intro h");
        assert_eq!(Tactic::new(" \t "), Err(EmptyTactic));
    }

    #[test]
    fn global_context_requires_statement() {
        assert!(GlobalContext::new("  ").is_err());
        assert_eq!(
            GlobalContext::new("P -> P").unwrap().theorem_statement(),
            "P -> P"
        );
    }
}
