use std::io;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Duration;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use tacsearch::agent::SearchConfig;
use tacsearch::bridge::{run_conformance, stub, BridgeConfig, ConformanceProbe};
use tacsearch::llm::{GuidanceBackend, LlmError, RateLimiter, RemoteBackend, RemoteConfig};
use tacsearch::prompt::SystemPromptKind;
use tacsearch::toy::{brute_force_prove, ToySuite};
use tacsearch_bench::runner::{verification_env, write_report};
use tacsearch_bench::{
    format_percent, load_records, report_from_records, run_suite, verify_record, BackendFactory,
    BenchmarkSuite, EpisodeRecord, OracleFactory, ReplayFactory, RunOptions, Strategy,
    SuiteTheorem,
};

#[derive(Parser)]
#[command(
    name = "tacsearch",
    version,
    about = "Model-guided proof search benchmarks"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Attempt every theorem of a suite and write traces and a report.
    Run(RunArgs),
    /// Check the proofs in episode files against a fresh environment.
    Replay(ReplayArgs),
    /// Rebuild the metrics report from episode files.
    Report(ReportArgs),
    /// Brute-force proofs for a toy theorem suite.
    Oracle(OracleArgs),
    /// Serve the toy prover over the bridge protocol on stdin/stdout.
    ToyAdapter(ToySuiteArg),
    /// Run the bridge protocol conformance checks against an adapter.
    Conformance(ConformanceArgs),
}

#[derive(Args)]
struct SuiteArg {
    /// Suite file (JSON). Defaults to the bundled toy suite.
    #[arg(long)]
    suite: Option<PathBuf>,
}

#[derive(Args)]
struct ToySuiteArg {
    /// Toy theorem file. Defaults to the bundled one.
    #[arg(long)]
    suite: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum BackendKind {
    /// Scripted from brute-force proofs (toy suites only).
    Oracle,
    /// An OpenAI-compatible chat completions endpoint.
    Remote,
    /// Recordings from an earlier run.
    Replay,
}

#[derive(Clone, Copy, ValueEnum)]
enum PromptStyle {
    Lean,
    Coq,
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    suite: SuiteArg,
    /// Restrict the run to these theorems.
    #[arg(long = "theorem")]
    theorems: Vec<String>,
    #[arg(long, value_enum, default_value = "oracle")]
    backend: BackendKind,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
    /// Directory of recordings to replay, for `--backend replay`.
    #[arg(long)]
    recordings: Option<PathBuf>,
    /// Record every completion into this directory.
    #[arg(long)]
    record: Option<PathBuf>,
    #[arg(long, default_value_t = 1)]
    attempts: u32,
    #[arg(long, default_value_t = 1)]
    jobs: usize,
    /// Run only a single search instead of the staged ensemble.
    #[arg(long)]
    single: bool,
    #[arg(long, default_value_t = 4)]
    oracle_depth: usize,
    #[command(flatten)]
    search: SearchFlags,
    #[command(flatten)]
    remote: RemoteFlags,
}

/// Overrides applied on top of the suite config.
#[derive(Args)]
struct SearchFlags {
    #[arg(long)]
    max_queries: Option<u32>,
    #[arg(long)]
    timeout_seconds: Option<f64>,
    #[arg(long)]
    per_state_budget: Option<u32>,
    #[arg(long)]
    max_depth: Option<usize>,
    #[arg(long)]
    format_retry_cap: Option<u32>,
    #[arg(long)]
    token_budget: Option<usize>,
    #[arg(long)]
    k_retrieve: Option<usize>,
    #[arg(long)]
    max_output_tokens: Option<u32>,
    #[arg(long, value_enum)]
    system_prompt: Option<PromptStyle>,
}

impl SearchFlags {
    fn apply(&self, c: &mut SearchConfig) {
        macro_rules! set {
            ($($f:ident => $t:ident),*) => { $(if let Some(v) = self.$f { c.$t = v; })* };
        }
        set!(max_queries => max_queries, timeout_seconds => wall_timeout_seconds,
             per_state_budget => per_state_budget, max_depth => max_depth,
             format_retry_cap => format_retry_cap, token_budget => token_budget,
             k_retrieve => k_retrieve, max_output_tokens => max_output_tokens);
        if let Some(s) = self.system_prompt {
            c.system_prompt = match s {
                PromptStyle::Lean => SystemPromptKind::LeanStyle,
                PromptStyle::Coq => SystemPromptKind::CoqStyle,
            };
        }
    }
}

#[derive(Args)]
struct RemoteFlags {
    #[arg(long, default_value = "https://api.openai.com/v1")]
    base_url: String,
    #[arg(long, default_value = "gpt-4")]
    model: String,
    /// Environment variable holding the API key.
    #[arg(long, default_value = "TACSEARCH_API_KEY")]
    api_key_env: String,
    /// Requests per second across all workers. 0 disables the limit.
    #[arg(long, default_value_t = 0.0)]
    rate_limit: f64,
    #[arg(long, default_value_t = 4)]
    retries: u32,
    #[arg(long, default_value_t = 120.0)]
    request_timeout: f64,
}

#[derive(Args)]
struct ReplayArgs {
    /// Run output directory or a single episode file.
    path: PathBuf,
    #[command(flatten)]
    suite: SuiteArg,
}

#[derive(Args)]
struct ReportArgs {
    /// Run output directory.
    dir: PathBuf,
    /// Write report files here instead of into `dir`.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct OracleArgs {
    #[command(flatten)]
    suite: ToySuiteArg,
    #[arg(long, default_value_t = 4)]
    max_depth: usize,
}

#[derive(Args)]
struct ConformanceArgs {
    #[arg(long, default_value_t = 10.0)]
    timeout_seconds: f64,
    /// Adapter command and arguments.
    #[arg(required = true, last = true)]
    command: Vec<String>,
}

fn load_suite(path: Option<&Path>) -> Result<BenchmarkSuite> {
    Ok(match path {
        Some(p) => BenchmarkSuite::load(p).with_context(|| format!("loading {}", p.display()))?,
        None => BenchmarkSuite::bundled_toy(),
    })
}

fn load_toy(path: Option<&Path>) -> Result<ToySuite> {
    Ok(match path {
        Some(p) => {
            let text =
                std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            ToySuite::parse(&text)?
        }
        None => ToySuite::bundled(),
    })
}

struct RemoteFactory(RemoteConfig);

impl BackendFactory for RemoteFactory {
    fn make(&self, _: &SuiteTheorem, _: u32) -> Result<Box<dyn GuidanceBackend>, LlmError> {
        Ok(Box::new(RemoteBackend::new(self.0.clone())))
    }
}

fn cmd_run(a: RunArgs) -> Result<ExitCode> {
    let suite = load_suite(a.suite.suite.as_deref())?
        .prepare()?
        .select(&a.theorems)?;
    let mut config = suite.config.clone().unwrap_or_default();
    a.search.apply(&mut config);
    config.validate()?;
    let factory: Box<dyn BackendFactory> = match a.backend {
        BackendKind::Oracle => {
            let Some(toy) = suite.toy.clone() else {
                bail!("the oracle backend needs a toy environment");
            };
            Box::new(OracleFactory {
                suite: toy,
                max_depth: a.oracle_depth,
            })
        }
        BackendKind::Remote => {
            let r = &a.remote;
            Box::new(RemoteFactory(RemoteConfig {
                base_url: r.base_url.clone(),
                model: r.model.clone(),
                api_key_env: r.api_key_env.clone(),
                timeout: Duration::from_secs_f64(r.request_timeout),
                retries: r.retries,
                rate_limit: if r.rate_limit > 0.0 {
                    RateLimiter::per_second(r.rate_limit)
                } else {
                    RateLimiter::unlimited()
                },
                ..RemoteConfig::default()
            }))
        }
        BackendKind::Replay => {
            let Some(dir) = a.recordings.clone() else {
                bail!("--backend replay needs --recordings DIR");
            };
            Box::new(ReplayFactory { dir })
        }
    };
    let options = RunOptions {
        config,
        attempts: a.attempts.max(1),
        parallelism: a.jobs.max(1),
        strategy: if a.single {
            Strategy::Single
        } else {
            Strategy::Ensemble
        },
        output_dir: Some(a.out.clone()),
        record_dir: a.record.clone(),
    };
    let out = run_suite(&suite, factory.as_ref(), &options)?;
    print!("{}", out.report.render_text());
    println!("\nwrote {}", a.out.display());
    Ok(ExitCode::SUCCESS)
}

fn cmd_replay(a: ReplayArgs) -> Result<ExitCode> {
    let suite = load_suite(a.suite.suite.as_deref())?.prepare()?;
    let records = if a.path.is_dir() {
        load_records(&a.path)?
    } else {
        let text = std::fs::read_to_string(&a.path)?;
        vec![EpisodeRecord::from_json(&text).map_err(anyhow::Error::msg)?]
    };
    let mut failures = 0;
    let mut checked = 0;
    for r in &records {
        let mut env = verification_env(&suite).map_err(anyhow::Error::msg)?;
        match verify_record(r, env.as_mut()) {
            Ok(true) => {
                checked += 1;
                println!("ok   {}", r.stem());
            }
            Ok(false) => println!("skip {} (not proved)", r.stem()),
            Err(e) => {
                failures += 1;
                println!("FAIL {}: {e}", r.stem());
            }
        }
    }
    println!("{checked} proofs verified, {failures} failed");
    Ok(if failures == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    })
}

fn cmd_report(a: ReportArgs) -> Result<ExitCode> {
    let records = load_records(&a.dir).with_context(|| format!("reading {}", a.dir.display()))?;
    let report = report_from_records(&records);
    let out = a.out.unwrap_or(a.dir);
    std::fs::create_dir_all(&out)?;
    write_report(&out, &report)?;
    print!("{}", report.render_text());
    Ok(ExitCode::SUCCESS)
}

fn cmd_oracle(a: OracleArgs) -> Result<ExitCode> {
    let suite = load_toy(a.suite.suite.as_deref())?;
    let mut solved = 0;
    for th in suite.theorems() {
        match brute_force_prove(th, a.max_depth) {
            Some(p) => {
                solved += 1;
                let steps: Vec<String> = p.iter().map(ToString::to_string).collect();
                println!("{}: {}", th.name, steps.join("; "));
            }
            None => println!("{}: no proof within depth {}", th.name, a.max_depth),
        }
    }
    let total = suite.theorems().len();
    let frac = if total == 0 {
        0.0
    } else {
        solved as f64 / total as f64
    };
    println!("{solved}/{total} proved ({}%)", format_percent(frac));
    Ok(ExitCode::SUCCESS)
}

fn cmd_toy_adapter(a: ToySuiteArg) -> Result<ExitCode> {
    let suite = load_toy(a.suite.as_deref())?;
    stub::serve(io::stdin().lock(), io::stdout().lock(), &suite)?;
    Ok(ExitCode::SUCCESS)
}

fn cmd_conformance(a: ConformanceArgs) -> Result<ExitCode> {
    let mut config = BridgeConfig::new(a.command);
    config.timeout = Duration::from_secs_f64(a.timeout_seconds);
    let results = run_conformance(&config, &ConformanceProbe::toy());
    for r in &results {
        println!("{r}");
    }
    Ok(if results.iter().all(|r| r.passed) {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    })
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run(a) => cmd_run(a),
        Command::Replay(a) => cmd_replay(a),
        Command::Report(a) => cmd_report(a),
        Command::Oracle(a) => cmd_oracle(a),
        Command::ToyAdapter(a) => cmd_toy_adapter(a),
        Command::Conformance(a) => cmd_conformance(a),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("tacsearch: {e:#}");
            ExitCode::from(2)
        }
    }
}
