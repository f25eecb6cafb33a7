//! Line-oriented theorem suite format.
//!
//! ```text
//! # comment
//! lemma add_zero : a + 0 = a
//! theorem t1 : P -> P
//!   hyp h0 : Q
//!   use add_zero, mul_comm
//!   tag logic
//! ```
//!
//! `hyp`, `use` and `tag` lines attach to the most recent `theorem`.
//! Indentation is ignored. Lemmas must be declared before they are used.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use thiserror::Error;

use crate::proof::{Obligation, ProofState};
use crate::retrieval::{LemmaKind, LemmaRecord};

use super::term::Term;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ToyTheorem {
    pub name: String,
    pub goal: Term,
    pub hypotheses: Vec<(String, Term)>,
    /// Lemmas usable by `apply` and `rw`, resolved from `use` lines.
    pub lemmas: Vec<(String, Term)>,
    pub tags: Vec<String>,
}

impl ToyTheorem {
    pub fn new(name: impl Into<String>, goal: Term) -> Self {
        Self {
            name: name.into(),
            goal,
            hypotheses: Vec::new(),
            lemmas: Vec::new(),
            tags: Vec::new(),
        }
    }

    pub fn with_hypotheses(mut self, hyps: impl IntoIterator<Item = (String, Term)>) -> Self {
        self.hypotheses.extend(hyps);
        self
    }

    pub fn with_lemmas(mut self, lemmas: impl IntoIterator<Item = (String, Term)>) -> Self {
        self.lemmas.extend(lemmas);
        self
    }

    pub fn initial_obligation(&self) -> Obligation {
        Obligation::with_hypotheses(
            self.goal.to_string(),
            self.hypotheses
                .iter()
                .map(|(n, t)| (n.clone(), t.to_string())),
        )
        .expect("suite loader rejects duplicate hypothesis names")
    }

    pub fn initial_state(&self) -> ProofState {
        ProofState::single(self.initial_obligation())
    }

    /// Human-readable statement, used as the global context.
    pub fn statement(&self) -> String {
        let mut s = format!("theorem {}", self.name);
        for (n, t) in &self.hypotheses {
            let _ = write!(s, " ({n} : {t})");
        }
        let _ = write!(s, " : {}", self.goal);
        s
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ToySuite {
    lemmas: Vec<(String, Term)>,
    theorems: Vec<ToyTheorem>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("suite line {line}: {message}")]
pub struct SuiteError {
    pub line: usize,
    pub message: String,
}

impl ToySuite {
    pub fn theorems(&self) -> &[ToyTheorem] {
        &self.theorems
    }

    pub fn lemmas(&self) -> &[(String, Term)] {
        &self.lemmas
    }

    pub fn theorem(&self, name: &str) -> Option<&ToyTheorem> {
        self.theorems.iter().find(|t| t.name == name)
    }

    /// The lemma library as a retrieval corpus.
    pub fn corpus(&self) -> Vec<LemmaRecord> {
        self.lemmas
            .iter()
            .map(|(n, t)| LemmaRecord {
                name: n.clone(),
                statement: t.to_string(),
                kind: LemmaKind::Lemma,
            })
            .collect()
    }

    pub fn parse(text: &str) -> Result<Self, SuiteError> {
        let mut suite = ToySuite::default();
        let mut library: BTreeMap<String, Term> = BTreeMap::new();
        let mut names = BTreeSet::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let err = |message: String| SuiteError { line, message };
            let trimmed = raw.trim();
            if trimmed.is_empty() || trimmed.starts_with('#') {
                continue;
            }
            let (kw, rest) = trimmed
                .split_once(char::is_whitespace)
                .ok_or_else(|| err(format!("incomplete record '{trimmed}'")))?;
            let rest = rest.trim();
            match kw {
                "lemma" | "theorem" | "hyp" => {
                    let (name, body) = rest
                        .split_once(':')
                        .ok_or_else(|| err(format!("expected '{kw} NAME : TERM'")))?;
                    let name = name.trim();
                    if name.is_empty() || name.contains(char::is_whitespace) {
                        return Err(err(format!("invalid name '{name}'")));
                    }
                    let term = Term::parse(body.trim()).map_err(|e| err(e.to_string()))?;
                    match kw {
                        "lemma" => {
                            if library.insert(name.to_string(), term.clone()).is_some() {
                                return Err(err(format!("duplicate lemma '{name}'")));
                            }
                            suite.lemmas.push((name.to_string(), term));
                        }
                        "theorem" => {
                            if !names.insert(name.to_string()) {
                                return Err(err(format!("duplicate theorem '{name}'")));
                            }
                            suite.theorems.push(ToyTheorem::new(name, term));
                        }
                        _ => {
                            let th = suite
                                .theorems
                                .last_mut()
                                .ok_or_else(|| err("'hyp' before any theorem".into()))?;
                            if th.hypotheses.iter().any(|(n, _)| n == name) {
                                return Err(err(format!("duplicate hypothesis '{name}'")));
                            }
                            th.hypotheses.push((name.to_string(), term));
                        }
                    }
                }
                "use" => {
                    let th = suite
                        .theorems
                        .last_mut()
                        .ok_or_else(|| err("'use' before any theorem".into()))?;
                    for name in rest.split(',').map(str::trim).filter(|s| !s.is_empty()) {
                        let term = library
                            .get(name)
                            .ok_or_else(|| err(format!("unknown lemma '{name}'")))?;
                        if th.lemmas.iter().any(|(n, _)| n == name) {
                            return Err(err(format!("lemma '{name}' used twice")));
                        }
                        th.lemmas.push((name.to_string(), term.clone()));
                    }
                }
                "tag" => {
                    let th = suite
                        .theorems
                        .last_mut()
                        .ok_or_else(|| err("'tag' before any theorem".into()))?;
                    th.tags.extend(
                        rest.split(',')
                            .map(str::trim)
                            .filter(|s| !s.is_empty())
                            .map(String::from),
                    );
                }
                other => return Err(err(format!("unknown record kind '{other}'"))),
            }
        }
        Ok(suite)
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for (n, t) in &self.lemmas {
            let _ = writeln!(out, "lemma {n} : {t}");
        }
        for th in &self.theorems {
            let _ = writeln!(out, "theorem {} : {}", th.name, th.goal);
            for (n, t) in &th.hypotheses {
                let _ = writeln!(out, "  hyp {n} : {t}");
            }
            if !th.lemmas.is_empty() {
                let names: Vec<&str> = th.lemmas.iter().map(|(n, _)| n.as_str()).collect();
                let _ = writeln!(out, "  use {}", names.join(", "));
            }
            if !th.tags.is_empty() {
                let _ = writeln!(out, "  tag {}", th.tags.join(", "));
            }
        }
        out
    }

    /// The bundled suite used by tests and the acceptance run.
    pub fn bundled() -> Self {
        Self::parse(BUNDLED_SUITE).expect("bundled suite parses")
    }
}

pub const BUNDLED_SUITE: &str = include_str!("../../assets/toy_suite.txt");

#[cfg(test)]
mod tests {
    use super::*;

    const SAMPLE: &str = "\
# sample
lemma add_zero : a + 0 = a
lemma pq : P -> Q

theorem id : P -> P
  tag logic
theorem uses : Q
  hyp hp : P
  use pq
  tag logic, lemma
";

    #[test]
    fn parses_records() {
        let s = ToySuite::parse(SAMPLE).unwrap();
        assert_eq!(s.theorems().len(), 2);
        let t = s.theorem("uses").unwrap();
        assert_eq!(t.hypotheses, vec![("hp".to_string(), Term::atom("P"))]);
        assert_eq!(t.lemmas[0].0, "pq");
        assert_eq!(t.tags, vec!["logic", "lemma"]);
        assert_eq!(s.corpus().len(), 2);
        assert_eq!(t.statement(), "theorem uses (hp : P) : Q");
    }

    #[test]
    fn text_round_trip() {
        let s = ToySuite::parse(SAMPLE).unwrap();
        assert_eq!(ToySuite::parse(&s.to_text()).unwrap(), s);
        let b = ToySuite::bundled();
        assert_eq!(ToySuite::parse(&b.to_text()).unwrap(), b);
    }

    #[test]
    fn rejects_bad_records() {
        let cases = [
            ("theorem a : P\ntheorem a : Q", 2, "duplicate theorem"),
            ("hyp h : P", 1, "before any theorem"),
            ("theorem a : P\n  use nope", 2, "unknown lemma"),
            (
                "theorem a : P\n  hyp h : P\n  hyp h : Q",
                3,
                "duplicate hypothesis",
            ),
            ("axiom x : P", 1, "unknown record kind"),
            ("theorem a P", 1, "expected"),
            ("theorem a : P ->", 1, "term parse error"),
        ];
        for (src, line, needle) in cases {
            let e = ToySuite::parse(src).unwrap_err();
            assert_eq!(e.line, line, "{src}");
            assert!(e.message.contains(needle), "{src}: {e}");
        }
    }
}
