//! Benchmark suite files.
//!
//! A suite is a JSON document naming the theorems to attempt, the proof
//! environment to attempt them in and, optionally, a retrieval corpus and
//! search config overrides:
//!
//! ```json
//! {
//!   "name": "toy",
//!   "environment": { "kind": "toy" },
//!   "corpus": { "kind": "toy" },
//!   "theorems": [ { "name": "t_id", "tags": ["logic"] } ],
//!   "config": { "max_queries": 60 }
//! }
//! ```
//!
//! Relative paths are resolved against the directory of the suite file.

use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Duration;

use serde::{Deserialize, Serialize};
use tacsearch::agent::SearchConfig;
use tacsearch::bridge::BridgeConfig;
use tacsearch::retrieval::{parse_corpus, RetrievalIndex};
use tacsearch::toy::ToySuite;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SuiteLoadError {
    #[error("reading {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("suite file: {0}")]
    Json(#[from] serde_json::Error),
    #[error("toy suite: {0}")]
    Toy(#[from] tacsearch::toy::SuiteError),
    #[error("corpus: {0}")]
    Corpus(#[from] tacsearch::retrieval::RetrievalError),
    #[error("{0}")]
    Invalid(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EnvironmentSpec {
    /// The built-in prover. Without a path the bundled theorem suite is used.
    Toy {
        #[serde(default)]
        suite: Option<PathBuf>,
    },
    /// An adapter process speaking the line protocol on stdin/stdout.
    Bridge {
        command: Vec<String>,
        #[serde(default)]
        timeout_seconds: Option<f64>,
    },
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CorpusSpec {
    #[default]
    None,
    /// The lemma library of the toy suite.
    Toy,
    /// A corpus file in the retrieval text format.
    File { path: PathBuf },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SuiteTheorem {
    pub name: String,
    /// Statement given to the model. Filled from the toy suite when absent.
    #[serde(default)]
    pub statement: Option<String>,
    #[serde(default)]
    pub tags: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkSuite {
    pub name: String,
    pub environment: EnvironmentSpec,
    #[serde(default)]
    pub corpus: CorpusSpec,
    /// Empty means every theorem of a toy environment.
    #[serde(default)]
    pub theorems: Vec<SuiteTheorem>,
    #[serde(default)]
    pub config: Option<SearchConfig>,
}

impl BenchmarkSuite {
    pub fn bundled_toy() -> Self {
        Self {
            name: "toy".into(),
            environment: EnvironmentSpec::Toy { suite: None },
            corpus: CorpusSpec::Toy,
            theorems: Vec::new(),
            config: None,
        }
    }

    pub fn parse(text: &str) -> Result<Self, SuiteLoadError> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn load(path: &Path) -> Result<Self, SuiteLoadError> {
        let text = read(path)?;
        let mut suite = Self::parse(&text)?;
        let base = path.parent().unwrap_or(Path::new("."));
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        match &mut suite.environment {
            EnvironmentSpec::Toy { suite: Some(p) } => fix(p),
            EnvironmentSpec::Toy { suite: None } | EnvironmentSpec::Bridge { .. } => {}
        }
        if let CorpusSpec::File { path } = &mut suite.corpus {
            fix(path);
        }
        Ok(suite)
    }

    /// Loads referenced files, fills in statements and checks the result.
    pub fn prepare(&self) -> Result<PreparedSuite, SuiteLoadError> {
        let toy = match &self.environment {
            EnvironmentSpec::Toy { suite: None } => Some(ToySuite::bundled()),
            EnvironmentSpec::Toy { suite: Some(p) } => Some(ToySuite::parse(&read(p)?)?),
            EnvironmentSpec::Bridge { command, .. } => {
                if command.is_empty() {
                    return Err(SuiteLoadError::Invalid("bridge command is empty".into()));
                }
                None
            }
        };
        let mut theorems = self.theorems.clone();
        if theorems.is_empty() {
            let Some(toy) = &toy else {
                return Err(SuiteLoadError::Invalid(
                    "a bridge suite must list its theorems".into(),
                ));
            };
            theorems = toy
                .theorems()
                .iter()
                .map(|t| SuiteTheorem {
                    name: t.name.clone(),
                    statement: None,
                    tags: t.tags.clone(),
                })
                .collect();
        }
        let mut seen = BTreeSet::new();
        for t in &mut theorems {
            if !seen.insert(t.name.clone()) {
                return Err(SuiteLoadError::Invalid(format!(
                    "duplicate theorem '{}'",
                    t.name
                )));
            }
            if t.statement.is_none() {
                let found = toy.as_ref().and_then(|s| s.theorem(&t.name));
                match found {
                    Some(th) => t.statement = Some(th.statement()),
                    None => {
                        return Err(SuiteLoadError::Invalid(format!(
                            "theorem '{}' has no statement and is not in the toy suite",
                            t.name
                        )))
                    }
                }
            }
        }
        let corpus = match &self.corpus {
            CorpusSpec::None => None,
            CorpusSpec::Toy => match &toy {
                Some(s) => Some(s.corpus()),
                None => {
                    return Err(SuiteLoadError::Invalid(
                        "toy corpus needs a toy environment".into(),
                    ))
                }
            },
            CorpusSpec::File { path } => Some(parse_corpus(&read(path)?)?),
        };
        let index = corpus.map(RetrievalIndex::build).transpose()?;
        Ok(PreparedSuite {
            name: self.name.clone(),
            environment: self.environment.clone(),
            toy,
            index,
            theorems,
            config: self.config.clone(),
        })
    }
}

fn read(path: &Path) -> Result<String, SuiteLoadError> {
    fs::read_to_string(path).map_err(|source| SuiteLoadError::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// A suite with its files loaded, ready to run.
#[derive(Debug, Clone)]
pub struct PreparedSuite {
    pub name: String,
    pub environment: EnvironmentSpec,
    pub toy: Option<ToySuite>,
    pub index: Option<RetrievalIndex>,
    /// Every entry has a statement.
    pub theorems: Vec<SuiteTheorem>,
    pub config: Option<SearchConfig>,
}

impl PreparedSuite {
    pub fn bridge_config(&self) -> Option<BridgeConfig> {
        match &self.environment {
            EnvironmentSpec::Bridge {
                command,
                timeout_seconds,
            } => {
                let mut c = BridgeConfig::new(command.clone());
                if let Some(s) = timeout_seconds {
                    c.timeout = Duration::from_secs_f64(*s);
                }
                Some(c)
            }
            EnvironmentSpec::Toy { .. } => None,
        }
    }

    /// Keeps only the named theorems, in suite order.
    pub fn select(mut self, names: &[String]) -> Result<Self, SuiteLoadError> {
        if names.is_empty() {
            return Ok(self);
        }
        for n in names {
            if !self.theorems.iter().any(|t| &t.name == n) {
                return Err(SuiteLoadError::Invalid(format!(
                    "theorem '{n}' is not in the suite"
                )));
            }
        }
        self.theorems.retain(|t| names.contains(&t.name));
        Ok(self)
    }

    pub fn corpus_size(&self) -> usize {
        self.index.as_ref().map_or(0, RetrievalIndex::len)
    }
}
