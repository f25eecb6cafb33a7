//! BM25 retrieval of lemmas and definitions relevant to a proof state.

use std::cmp::Ordering;
use std::collections::{BTreeSet, HashMap};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::proof::ProofState;

pub const DEFAULT_K1: f64 = 1.2;
pub const DEFAULT_B: f64 = 0.75;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LemmaKind {
    Lemma,
    Definition,
}

impl fmt::Display for LemmaKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            LemmaKind::Lemma => "lemma",
            LemmaKind::Definition => "definition",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LemmaRecord {
    pub name: String,
    pub statement: String,
    pub kind: LemmaKind,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RetrievalError {
    #[error("duplicate lemma name '{0}'")]
    DuplicateName(String),
    #[error("corpus line {line}: {message}")]
    Corpus { line: usize, message: String },
    #[error("retrieval needs a non-error state")]
    ErrorState,
}

/// Lowercased tokens split at every non-alphanumeric character.
pub fn tokenize(text: &str) -> Vec<String> {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|s| !s.is_empty())
        .map(str::to_lowercase)
        .collect()
}

#[derive(Debug, Clone)]
struct Doc {
    record: LemmaRecord,
    tf: HashMap<String, u32>,
    len: usize,
}

#[derive(Debug, Clone)]
pub struct RetrievalIndex {
    docs: Vec<Doc>,
    df: HashMap<String, u32>,
    avg_len: f64,
    k1: f64,
    b: f64,
}

impl RetrievalIndex {
    pub fn build(corpus: Vec<LemmaRecord>) -> Result<Self, RetrievalError> {
        Self::with_params(corpus, DEFAULT_K1, DEFAULT_B)
    }

    pub fn with_params(corpus: Vec<LemmaRecord>, k1: f64, b: f64) -> Result<Self, RetrievalError> {
        let mut seen = BTreeSet::new();
        let mut docs = Vec::with_capacity(corpus.len());
        let mut df: HashMap<String, u32> = HashMap::new();
        for record in corpus {
            if !seen.insert(record.name.clone()) {
                return Err(RetrievalError::DuplicateName(record.name));
            }
            let tokens = tokenize(&format!("{} {}", record.name, record.statement));
            let mut tf: HashMap<String, u32> = HashMap::new();
            for t in &tokens {
                *tf.entry(t.clone()).or_default() += 1;
            }
            for t in tf.keys() {
                *df.entry(t.clone()).or_default() += 1;
            }
            docs.push(Doc {
                record,
                tf,
                len: tokens.len(),
            });
        }
        let total: usize = docs.iter().map(|d| d.len).sum();
        let avg_len = if docs.is_empty() {
            0.0
        } else {
            total as f64 / docs.len() as f64
        };
        Ok(Self {
            docs,
            df,
            avg_len,
            k1,
            b,
        })
    }

    pub fn len(&self) -> usize {
        self.docs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.docs.is_empty()
    }

    pub fn document_frequency(&self, token: &str) -> u32 {
        self.df.get(token).copied().unwrap_or(0)
    }

    pub fn average_length(&self) -> f64 {
        self.avg_len
    }

    fn idf(&self, df: u32) -> f64 {
        let n = self.docs.len() as f64;
        let df = f64::from(df);
        (1.0 + (n - df + 0.5) / (df + 0.5)).ln()
    }

    /// BM25 score of every document for the given query text, in corpus
    /// order. Each distinct query token contributes once.
    pub fn score_all(&self, query: &str) -> Vec<f64> {
        let terms: BTreeSet<String> = tokenize(query).into_iter().collect();
        self.docs
            .iter()
            .map(|d| {
                let norm = if self.avg_len > 0.0 {
                    1.0 - self.b + self.b * d.len as f64 / self.avg_len
                } else {
                    1.0
                };
                terms
                    .iter()
                    .filter_map(|t| {
                        let tf = f64::from(*d.tf.get(t)?);
                        let idf = self.idf(self.df[t]);
                        Some(idf * tf * (self.k1 + 1.0) / (tf + self.k1 * norm))
                    })
                    .sum()
            })
            .collect()
    }

    /// Top `k` documents with a positive score, best first; ties go to the
    /// lexicographically smaller name.
    pub fn search(&self, query: &str, k: usize) -> RetrievalResult {
        let scores = self.score_all(query);
        let mut ranked: Vec<(usize, f64)> = scores
            .into_iter()
            .enumerate()
            .filter(|(_, s)| *s > 0.0)
            .collect();
        ranked.sort_by(|(ia, sa), (ib, sb)| {
            sb.partial_cmp(sa)
                .unwrap_or(Ordering::Equal)
                .then_with(|| self.docs[*ia].record.name.cmp(&self.docs[*ib].record.name))
        });
        ranked.truncate(k);
        RetrievalResult {
            hits: ranked
                .into_iter()
                .map(|(i, score)| ScoredLemma {
                    record: self.docs[i].record.clone(),
                    score,
                })
                .collect(),
        }
    }
}

/// Query text for a state: every goal followed by its hypotheses.
pub fn state_query(state: &ProofState) -> String {
    let mut parts = Vec::new();
    for ob in state.obligations() {
        parts.push(ob.goal().to_string());
        parts.extend(ob.hypotheses().map(|(_, p)| p.to_string()));
    }
    parts.join(" ")
}

pub fn retrieve(
    index: &RetrievalIndex,
    state: &ProofState,
    k_retrieve: usize,
) -> Result<RetrievalResult, RetrievalError> {
    if state.is_error() {
        return Err(RetrievalError::ErrorState);
    }
    Ok(index.search(&state_query(state), k_retrieve))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredLemma {
    pub record: LemmaRecord,
    pub score: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RetrievalResult {
    pub hits: Vec<ScoredLemma>,
}

impl RetrievalResult {
    pub fn is_empty(&self) -> bool {
        self.hits.is_empty()
    }

    pub fn of_kind(&self, kind: LemmaKind) -> impl Iterator<Item = &LemmaRecord> + '_ {
        self.hits
            .iter()
            .map(|h| &h.record)
            .filter(move |r| r.kind == kind)
    }
}

/// Loads a corpus file: one `lemma NAME : STATEMENT` or
/// `definition NAME : STATEMENT` per line; `#` starts a comment line.
pub fn parse_corpus(text: &str) -> Result<Vec<LemmaRecord>, RetrievalError> {
    let mut out = Vec::new();
    let mut seen = BTreeSet::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let trimmed = raw.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let err = |message: &str| RetrievalError::Corpus {
            line,
            message: message.to_string(),
        };
        let (kw, rest) = trimmed
            .split_once(char::is_whitespace)
            .ok_or_else(|| err("expected 'KIND NAME : STATEMENT'"))?;
        let kind = match kw {
            "lemma" => LemmaKind::Lemma,
            "definition" => LemmaKind::Definition,
            _ => return Err(err("kind must be 'lemma' or 'definition'")),
        };
        let (name, statement) = rest
            .split_once(':')
            .ok_or_else(|| err("expected 'KIND NAME : STATEMENT'"))?;
        let name = name.trim();
        if name.is_empty() || name.contains(char::is_whitespace) {
            return Err(err("invalid name"));
        }
        if !seen.insert(name.to_string()) {
            return Err(RetrievalError::DuplicateName(name.to_string()));
        }
        out.push(LemmaRecord {
            name: name.to_string(),
            statement: statement.trim().to_string(),
            kind,
        });
    }
    Ok(out)
}

pub fn corpus_to_text(corpus: &[LemmaRecord]) -> String {
    corpus
        .iter()
        .map(|r| format!("{} {} : {}\n", r.kind, r.name, r.statement))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::proof::Obligation;

    fn rec(name: &str, statement: &str) -> LemmaRecord {
        LemmaRecord {
            name: name.into(),
            statement: statement.into(),
            kind: LemmaKind::Lemma,
        }
    }

    #[test]
    fn empty_corpus() {
        let idx = RetrievalIndex::build(vec![]).unwrap();
        assert!(idx.is_empty());
        assert!(retrieve(&idx, &ProofState::qed(), 8).unwrap().is_empty());
    }

    #[test]
    fn document_frequencies() {
        let one = RetrievalIndex::build(vec![rec("x", "gcd mul")]).unwrap();
        assert_eq!(one.document_frequency("x"), 1);
        assert_eq!(one.document_frequency("gcd"), 1);
        assert_eq!(one.document_frequency("mul"), 1);
        let three = RetrievalIndex::build(vec![
            rec("d1", "gcd a b"),
            rec("d2", "gcd c"),
            rec("d3", "prime"),
        ])
        .unwrap();
        assert_eq!(three.document_frequency("gcd"), 2);
    }

    #[test]
    fn duplicate_names_rejected() {
        let e = RetrievalIndex::build(vec![rec("a", "x"), rec("a", "y")]).unwrap_err();
        assert_eq!(e, RetrievalError::DuplicateName("a".into()));
    }

    #[test]
    fn two_document_example() {
        // Names are tokens too, so pick names that do not collide with the query.
        let idx = RetrievalIndex::build(vec![
            rec("d1", "gcd mul lcm"),
            rec("d2", "prime factorization"),
        ])
        .unwrap();
        // d1 has 4 tokens (d1 gcd mul lcm), d2 has 3, so avgdl = 3.5.
        // "gcd" and "lcm" each have df = 1 of N = 2: idf = ln(1 + 1.5 / 1.5) = ln 2.
        // d1 norm = 0.25 + 0.75 * 4 / 3.5; each term = ln 2 * 2.2 / (1 + 1.2 * norm).
        let scores = idx.score_all("gcd x = lcm");
        let norm = 0.25 + 0.75 * 4.0 / 3.5;
        let expected = 2.0 * std::f64::consts::LN_2 * 2.2 / (1.0 + 1.2 * norm);
        assert!(
            (scores[0] - expected).abs() < 1e-12,
            "{} vs {expected}",
            scores[0]
        );
        assert_eq!(scores[1], 0.0);
        let state = ProofState::single(Obligation::new("gcd * lcm = x"));
        let res = retrieve(&idx, &state, 8).unwrap();
        assert_eq!(res.hits.len(), 1);
        assert_eq!(res.hits[0].record.name, "d1");
    }

    #[test]
    fn duplicate_top_document_ties_by_name() {
        let idx = RetrievalIndex::build(vec![
            rec("zz", "gcd mul lcm"),
            rec("d2", "prime factorization"),
            rec("aa", "gcd mul lcm"),
        ])
        .unwrap();
        let res = idx.search("gcd lcm", 8);
        assert_eq!(res.hits[0].record.name, "aa");
        assert_eq!(res.hits[1].record.name, "zz");
        assert_eq!(res.hits[0].score, res.hits[1].score);
    }

    #[test]
    fn k_limits_and_error_states() {
        let idx =
            RetrievalIndex::build(vec![rec("a", "x"), rec("b", "x y"), rec("c", "x y z")]).unwrap();
        assert_eq!(idx.search("x", 2).hits.len(), 2);
        assert_eq!(
            retrieve(&idx, &ProofState::error(vec![], "w"), 2),
            Err(RetrievalError::ErrorState)
        );
    }

    #[test]
    fn tokenizer_splits_punctuation() {
        assert_eq!(
            tokenize("Nat.Gcd_comm (a*b)"),
            ["nat", "gcd", "comm", "a", "b"]
        );
    }

    #[test]
    fn corpus_file_round_trip() {
        let text = "# c\nlemma add_zero : a + 0 = a\ndefinition even : n = 2 * k\n";
        let corpus = parse_corpus(text).unwrap();
        assert_eq!(corpus[1].kind, LemmaKind::Definition);
        assert_eq!(parse_corpus(&corpus_to_text(&corpus)).unwrap(), corpus);
        assert!(matches!(
            parse_corpus("lemma a : x\nlemma a : y"),
            Err(RetrievalError::DuplicateName(_))
        ));
        assert!(matches!(
            parse_corpus("axiom a : x"),
            Err(RetrievalError::Corpus { line: 1, .. })
        ));
    }
}
