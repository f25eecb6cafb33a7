//! Runs a prepared suite episode by episode and writes traces, proof
//! scripts, recordings and the metrics report.

use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use tacsearch::agent::{
    ensemble_prove, prove, EpisodeTrace, FailureReason, SearchConfig, SearchOutcome, Stage,
    TraceSummary,
};
use tacsearch::bridge::BridgeSession;
use tacsearch::llm::{GuidanceBackend, LlmError, RecordingBackend, ReplayBackend};
use tacsearch::proof::{is_qed, lift_transition, GlobalContext, ProofEnvironment};
use tacsearch::toy::{oracle_backend, ToyEnv, ToySuite};

use crate::metrics::EpisodeResult;
use crate::report::{MetricsReport, ReportSpec};
use crate::suite::{PreparedSuite, SuiteTheorem};

pub const EPISODE_SCHEMA: &str = "tacsearch.episode/1";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Strategy {
    /// One search, with retrieval when the suite has a corpus.
    Single,
    /// Plain, then retrieval, then informal sketch, on one budget.
    #[default]
    Ensemble,
}

#[derive(Debug, Clone)]
pub struct RunOptions {
    pub config: SearchConfig,
    pub attempts: u32,
    pub parallelism: usize,
    pub strategy: Strategy,
    pub output_dir: Option<PathBuf>,
    /// Write one recording per episode here.
    pub record_dir: Option<PathBuf>,
}

impl RunOptions {
    pub fn new(config: SearchConfig) -> Self {
        Self {
            config,
            attempts: 1,
            parallelism: 1,
            strategy: Strategy::Ensemble,
            output_dir: None,
            record_dir: None,
        }
    }
}

/// Builds one fresh backend per episode.
pub trait BackendFactory: Sync {
    fn make(
        &self,
        theorem: &SuiteTheorem,
        attempt: u32,
    ) -> Result<Box<dyn GuidanceBackend>, LlmError>;
}

impl<F> BackendFactory for F
where
    F: Fn(&SuiteTheorem, u32) -> Result<Box<dyn GuidanceBackend>, LlmError> + Sync,
{
    fn make(
        &self,
        theorem: &SuiteTheorem,
        attempt: u32,
    ) -> Result<Box<dyn GuidanceBackend>, LlmError> {
        self(theorem, attempt)
    }
}

/// Scripted backends that replay the brute-force proof of each toy theorem.
pub struct OracleFactory {
    pub suite: ToySuite,
    pub max_depth: usize,
}

impl BackendFactory for OracleFactory {
    fn make(&self, theorem: &SuiteTheorem, _: u32) -> Result<Box<dyn GuidanceBackend>, LlmError> {
        let th = self
            .suite
            .theorem(&theorem.name)
            .ok_or_else(|| LlmError::Config(format!("'{}' is not a toy theorem", theorem.name)))?;
        let backend = oracle_backend(th, self.max_depth).ok_or_else(|| {
            LlmError::Config(format!(
                "no oracle proof of '{}' within depth {}",
                theorem.name, self.max_depth
            ))
        })?;
        Ok(Box::new(backend))
    }
}

/// Replays the recordings written by an earlier run with `record_dir`.
pub struct ReplayFactory {
    pub dir: PathBuf,
}

impl BackendFactory for ReplayFactory {
    fn make(
        &self,
        theorem: &SuiteTheorem,
        attempt: u32,
    ) -> Result<Box<dyn GuidanceBackend>, LlmError> {
        let path = self
            .dir
            .join(format!("{}.jsonl", episode_stem(&theorem.name, attempt)));
        Ok(Box::new(ReplayBackend::from_file(&path)?))
    }
}

/// File name stem shared by an episode's trace, proof and recording.
pub fn episode_stem(theorem: &str, attempt: u32) -> String {
    let safe: String = theorem
        .chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || "_-.".contains(c) {
                c
            } else {
                '_'
            }
        })
        .collect();
    format!("{safe}__a{attempt}")
}

/// What gets written for every episode.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeRecord {
    pub schema: String,
    pub attempt: u32,
    pub tags: Vec<String>,
    pub trace: EpisodeTrace,
}

impl EpisodeRecord {
    pub fn result(&self) -> EpisodeResult {
        let mut r = EpisodeResult::from_trace(&self.trace, self.attempt, &self.tags);
        r.trace_file = Some(format!("episodes/{}.json", self.stem()));
        r
    }

    pub fn stem(&self) -> String {
        episode_stem(&self.trace.theorem, self.attempt)
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("records always serialize");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> Result<Self, String> {
        let r: Self = serde_json::from_str(text).map_err(|e| e.to_string())?;
        if r.schema != EPISODE_SCHEMA {
            return Err(format!("unsupported episode schema '{}'", r.schema));
        }
        Ok(r)
    }
}

pub struct RunOutput {
    pub records: Vec<EpisodeRecord>,
    pub report: MetricsReport,
}

impl RunOutput {
    pub fn results(&self) -> Vec<EpisodeResult> {
        self.records.iter().map(EpisodeRecord::result).collect()
    }
}

/// Grid used for a report over `records`: every attempt index and the
/// largest configured query cap.
pub fn report_spec(records: &[EpisodeRecord]) -> ReportSpec {
    let attempts = records.iter().map(|r| r.attempt).max().unwrap_or(1);
    let cap = records
        .iter()
        .map(|r| r.trace.config.max_queries)
        .max()
        .unwrap_or(60);
    ReportSpec::default().covering(attempts, cap)
}

pub fn report_from_records(records: &[EpisodeRecord]) -> MetricsReport {
    let results: Vec<EpisodeResult> = records.iter().map(EpisodeRecord::result).collect();
    MetricsReport::build(&results, &report_spec(records))
}

fn aborted(theorem: &str, config: &SearchConfig, message: String) -> EpisodeTrace {
    let mut trace = EpisodeTrace::new(theorem, config);
    trace.summary = Some(TraceSummary {
        outcome: SearchOutcome::Failed {
            reason: FailureReason::Infrastructure(message),
        },
        queries_used: 0,
        wall_seconds: 0.0,
        stage: Stage::Plain,
    });
    trace
}

fn open_env(suite: &PreparedSuite) -> Result<Box<dyn ProofEnvironment>, String> {
    if let Some(toy) = &suite.toy {
        return Ok(Box::new(ToyEnv::new(toy)));
    }
    let config = suite.bridge_config().ok_or("suite has no environment")?;
    Ok(Box::new(
        BridgeSession::start(config).map_err(|e| e.to_string())?,
    ))
}

fn episode(
    suite: &PreparedSuite,
    theorem: &SuiteTheorem,
    attempt: u32,
    factory: &dyn BackendFactory,
    options: &RunOptions,
) -> EpisodeTrace {
    let config = &options.config;
    let backend = match factory.make(theorem, attempt) {
        Ok(b) => b,
        Err(e) => return aborted(&theorem.name, config, format!("backend: {e}")),
    };
    let mut backend: Box<dyn GuidanceBackend> = match &options.record_dir {
        Some(dir) => {
            let path = dir.join(format!("{}.jsonl", episode_stem(&theorem.name, attempt)));
            let _ = fs::remove_file(&path);
            match RecordingBackend::to_file(backend, &path) {
                Ok(r) => Box::new(r),
                Err(e) => return aborted(&theorem.name, config, format!("recording: {e}")),
            }
        }
        None => backend,
    };
    let mut env = match open_env(suite) {
        Ok(e) => e,
        Err(e) => return aborted(&theorem.name, config, format!("environment: {e}")),
    };
    let statement = theorem
        .statement
        .clone()
        .unwrap_or_else(|| theorem.name.clone());
    let ctx = match GlobalContext::new(statement) {
        Ok(c) => c,
        Err(_) => return aborted(&theorem.name, config, "empty theorem statement".into()),
    };
    let (_, trace) = match options.strategy {
        Strategy::Single => prove(
            &theorem.name,
            env.as_mut(),
            backend.as_mut(),
            suite.index.as_ref(),
            &ctx,
            config,
        ),
        Strategy::Ensemble => ensemble_prove(
            &theorem.name,
            env.as_mut(),
            backend.as_mut(),
            suite.index.as_ref(),
            &ctx,
            config,
        ),
    };
    log::info!(
        "{} #{}: {}",
        theorem.name,
        attempt,
        trace
            .summary
            .as_ref()
            .map_or("no summary".to_string(), |s| match &s.outcome {
                SearchOutcome::Proved { proof } => format!("proved in {} steps", proof.len()),
                SearchOutcome::Failed { reason } => format!("failed ({reason})"),
            })
    );
    trace
}

/// Runs every (theorem, attempt) pair and, when an output directory is
/// set, writes `episodes/`, `proofs/` and the report files there.
pub fn run_suite(
    suite: &PreparedSuite,
    factory: &dyn BackendFactory,
    options: &RunOptions,
) -> io::Result<RunOutput> {
    if let Some(dir) = &options.record_dir {
        fs::create_dir_all(dir)?;
    }
    let jobs: Vec<(&SuiteTheorem, u32)> = suite
        .theorems
        .iter()
        .flat_map(|t| (1..=options.attempts.max(1)).map(move |a| (t, a)))
        .collect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(options.parallelism.max(1))
        .build()
        .map_err(io::Error::other)?;
    let records: Vec<EpisodeRecord> = pool.install(|| {
        jobs.par_iter()
            .map(|(t, a)| EpisodeRecord {
                schema: EPISODE_SCHEMA.into(),
                attempt: *a,
                tags: t.tags.clone(),
                trace: episode(suite, t, *a, factory, options),
            })
            .collect()
    });
    let report = report_from_records(&records);
    let out = RunOutput { records, report };
    if let Some(dir) = &options.output_dir {
        write_outputs(dir, &out)?;
    }
    Ok(out)
}

pub fn write_outputs(dir: &Path, out: &RunOutput) -> io::Result<()> {
    let episodes = dir.join("episodes");
    let proofs = dir.join("proofs");
    fs::create_dir_all(&episodes)?;
    fs::create_dir_all(&proofs)?;
    for r in &out.records {
        fs::write(episodes.join(format!("{}.json", r.stem())), r.to_json())?;
        if let Some(proof) = r.trace.summary.as_ref().and_then(|s| s.outcome.proof()) {
            let script: String = proof.iter().map(|t| format!("{t}\n")).collect();
            fs::write(proofs.join(format!("{}.txt", r.stem())), script)?;
        }
    }
    write_report(dir, &out.report)
}

pub fn write_report(dir: &Path, report: &MetricsReport) -> io::Result<()> {
    fs::write(dir.join("report.json"), report.to_json())?;
    fs::write(dir.join("report.csv"), report.to_csv())?;
    fs::write(dir.join("report.txt"), report.render_text())
}

/// Reads every episode record under `dir/episodes`, sorted by file name.
pub fn load_records(dir: &Path) -> io::Result<Vec<EpisodeRecord>> {
    let mut paths: Vec<PathBuf> = fs::read_dir(dir.join("episodes"))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "json"))
        .collect();
    paths.sort();
    paths
        .iter()
        .map(|p| {
            EpisodeRecord::from_json(&fs::read_to_string(p)?).map_err(|e| {
                io::Error::new(io::ErrorKind::InvalidData, format!("{}: {e}", p.display()))
            })
        })
        .collect()
}

/// Replays a proved episode's tactic script in a fresh environment.
/// Returns `Ok(false)` for episodes that did not claim a proof.
pub fn verify_record(
    record: &EpisodeRecord,
    env: &mut dyn ProofEnvironment,
) -> Result<bool, String> {
    let Some(proof) = record
        .trace
        .summary
        .as_ref()
        .and_then(|s| s.outcome.proof())
    else {
        return Ok(false);
    };
    let init = env
        .initial_state(&record.trace.theorem)
        .map_err(|e| e.to_string())?;
    let end = lift_transition(env, &init, proof).map_err(|e| e.to_string())?;
    if is_qed(&end) {
        Ok(true)
    } else {
        Err(match end.error_message() {
            Some(m) => format!("{}: replay ended in an error: {m}", record.trace.theorem),
            None => format!(
                "{}: replay left {} open goals",
                record.trace.theorem,
                end.obligations().len()
            ),
        })
    }
}

/// Environment for verifying records of `suite`.
pub fn verification_env(suite: &PreparedSuite) -> Result<Box<dyn ProofEnvironment>, String> {
    open_env(suite)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::suite::BenchmarkSuite;

    fn toy(names: &[&str]) -> PreparedSuite {
        let names: Vec<String> = names.iter().map(|s| s.to_string()).collect();
        BenchmarkSuite::bundled_toy()
            .prepare()
            .unwrap()
            .select(&names)
            .unwrap()
    }

    fn oracle() -> OracleFactory {
        OracleFactory {
            suite: ToySuite::bundled(),
            max_depth: 4,
        }
    }

    #[test]
    fn stems_are_file_safe() {
        assert_eq!(episode_stem("a/b c", 2), "a_b_c__a2");
    }

    #[test]
    fn oracle_run_proves_and_writes_files() {
        let dir = tempfile::tempdir().unwrap();
        let mut opts = RunOptions::new(SearchConfig::default());
        opts.output_dir = Some(dir.path().to_path_buf());
        opts.parallelism = 2;
        let out = run_suite(&toy(&["t_id", "t_gcd"]), &oracle(), &opts).unwrap();
        assert!(out.results().iter().all(|r| r.proved));
        assert!(dir.path().join("proofs/t_id__a1.txt").exists());
        assert!(dir.path().join("report.csv").exists());
        let back = load_records(dir.path()).unwrap();
        let mut expected = out.records.clone();
        expected.sort_by_key(EpisodeRecord::stem);
        assert_eq!(back, expected);
        assert_eq!(report_from_records(&back).to_json(), out.report.to_json());
    }

    #[test]
    fn backend_failure_is_infrastructure() {
        let f = |_: &SuiteTheorem, _: u32| -> Result<Box<dyn GuidanceBackend>, LlmError> {
            Err(LlmError::Config("no key".into()))
        };
        let out = run_suite(
            &toy(&["t_id"]),
            &f,
            &RunOptions::new(SearchConfig::default()),
        )
        .unwrap();
        assert!(out.results()[0].is_infrastructure());
        assert_eq!(out.report.excluded.len(), 1);
        assert_eq!(out.report.theorems, 0);
    }

    #[test]
    fn attempts_multiply_episodes() {
        let mut opts = RunOptions::new(SearchConfig::default());
        opts.attempts = 3;
        let out = run_suite(&toy(&["t_id"]), &oracle(), &opts).unwrap();
        let attempts: Vec<u32> = out.records.iter().map(|r| r.attempt).collect();
        assert_eq!(attempts, [1, 2, 3]);
    }

    #[test]
    fn verify_detects_a_bogus_proof() {
        let suite = toy(&["t_id"]);
        let out = run_suite(&suite, &oracle(), &RunOptions::new(SearchConfig::default())).unwrap();
        let mut rec = out.records[0].clone();
        let mut env = verification_env(&suite).unwrap();
        assert_eq!(verify_record(&rec, env.as_mut()), Ok(true));
        if let Some(s) = &mut rec.trace.summary {
            s.outcome = SearchOutcome::Proved {
                proof: vec![tacsearch::proof::Tactic::new("split").unwrap()],
            };
        }
        assert!(verify_record(&rec, env.as_mut()).is_err());
    }
}
