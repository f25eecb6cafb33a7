//! Benchmark harness for tacsearch: suite files, a parallel episode
//! runner, pass-rate metrics and reports.

pub mod metrics;
pub mod report;
pub mod runner;
pub mod suite;

pub use metrics::{
    aggregate_stats, format_percent, pass_at_k_seconds, pass_at_k_with_n_queries, AggregateStats,
    EpisodeResult, PassRate, Split,
};
pub use report::{MetricsReport, ReportSpec};
pub use runner::{
    load_records, report_from_records, run_suite, verification_env, verify_record, write_report,
    BackendFactory, EpisodeRecord, OracleFactory, ReplayFactory, RunOptions, RunOutput, Strategy,
};
pub use suite::{BenchmarkSuite, CorpusSpec, EnvironmentSpec, PreparedSuite, SuiteTheorem};
