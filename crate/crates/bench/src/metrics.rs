//! Pass rates and aggregate statistics over episode results.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use tacsearch::agent::{EpisodeTrace, FailureReason, SearchOutcome, Stage};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeResult {
    pub theorem: String,
    /// Starts at 1.
    pub attempt: u32,
    pub proved: bool,
    pub queries_used: u32,
    pub wall_seconds: f64,
    pub stage: Stage,
    pub trace_file: Option<String>,
    /// Set when the harness, not the search, ended the episode.
    pub infrastructure_error: Option<String>,
    pub tags: Vec<String>,
}

impl EpisodeResult {
    /// Result of a finished episode. Traces without a summary count as
    /// infrastructure failures.
    pub fn from_trace(trace: &EpisodeTrace, attempt: u32, tags: &[String]) -> Self {
        let (proved, queries_used, wall_seconds, stage, infra) = match &trace.summary {
            Some(s) => {
                let infra = match &s.outcome {
                    SearchOutcome::Failed {
                        reason: FailureReason::Infrastructure(m),
                    } => Some(m.clone()),
                    _ => None,
                };
                (
                    s.outcome.is_proved(),
                    s.queries_used,
                    s.wall_seconds,
                    s.stage,
                    infra,
                )
            }
            None => (
                false,
                0,
                0.0,
                Stage::Plain,
                Some("trace has no summary".into()),
            ),
        };
        Self {
            theorem: trace.theorem.clone(),
            attempt,
            proved,
            queries_used,
            wall_seconds,
            stage,
            trace_file: None,
            infrastructure_error: infra,
            tags: tags.to_vec(),
        }
    }

    /// Shorthand for synthetic result sets.
    pub fn synthetic(
        theorem: impl Into<String>,
        proved: bool,
        queries_used: u32,
        wall_seconds: f64,
    ) -> Self {
        Self {
            theorem: theorem.into(),
            attempt: 1,
            proved,
            queries_used,
            wall_seconds,
            stage: Stage::Plain,
            trace_file: None,
            infrastructure_error: None,
            tags: Vec::new(),
        }
    }

    pub fn is_infrastructure(&self) -> bool {
        self.infrastructure_error.is_some()
    }
}

/// A fraction of theorems. `empty` flags a zero-size population, in which
/// case `value` is 0.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PassRate {
    pub proved: usize,
    pub population: usize,
    pub value: f64,
    pub empty: bool,
}

impl PassRate {
    fn of(proved: usize, population: usize) -> Self {
        if population == 0 {
            return Self {
                proved: 0,
                population: 0,
                value: 0.0,
                empty: true,
            };
        }
        Self {
            proved,
            population,
            value: proved as f64 / population as f64,
            empty: false,
        }
    }

    pub fn percent(&self) -> f64 {
        self.value * 100.0
    }
}

/// Theorems with at least one episode that the harness did not abort.
fn population(results: &[EpisodeResult]) -> BTreeSet<&str> {
    results
        .iter()
        .filter(|r| !r.is_infrastructure())
        .map(|r| r.theorem.as_str())
        .collect()
}

fn rate_where(results: &[EpisodeResult], ok: impl Fn(&EpisodeResult) -> bool) -> PassRate {
    let pop = population(results);
    let proved: BTreeSet<&str> = results
        .iter()
        .filter(|r| !r.is_infrastructure() && r.proved && ok(r))
        .map(|r| r.theorem.as_str())
        .collect();
    PassRate::of(proved.len(), pop.len())
}

/// Fraction of theorems proved by one of their first `k` attempts using at
/// most `n` queries.
pub fn pass_at_k_with_n_queries(results: &[EpisodeResult], k: u32, n: u32) -> PassRate {
    assert!(k >= 1 && n >= 1, "k and n start at 1");
    rate_where(results, |r| r.attempt <= k && r.queries_used <= n)
}

/// Fraction of theorems with a proving attempt faster than `k` seconds.
pub fn pass_at_k_seconds(results: &[EpisodeResult], k: f64) -> PassRate {
    assert!(k > 0.0, "k must be positive");
    rate_where(results, |r| r.wall_seconds < k)
}

/// Means over the total, failed and passed subpopulations. `None` marks an
/// empty subpopulation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Split {
    pub total: Option<f64>,
    pub failure: Option<f64>,
    pub pass: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateStats {
    pub episodes: usize,
    pub avg_queries: Split,
    pub seconds_per_proof: Split,
    pub seconds_per_query: Split,
}

fn mean(xs: &[f64]) -> Option<f64> {
    (!xs.is_empty()).then(|| xs.iter().sum::<f64>() / xs.len() as f64)
}

fn per_query(eps: &[&EpisodeResult]) -> Option<f64> {
    let q: u64 = eps.iter().map(|r| r.queries_used as u64).sum();
    (q > 0).then(|| eps.iter().map(|r| r.wall_seconds).sum::<f64>() / q as f64)
}

pub fn aggregate_stats(results: &[EpisodeResult]) -> AggregateStats {
    let all: Vec<&EpisodeResult> = results.iter().filter(|r| !r.is_infrastructure()).collect();
    let pass: Vec<&EpisodeResult> = all.iter().copied().filter(|r| r.proved).collect();
    let fail: Vec<&EpisodeResult> = all.iter().copied().filter(|r| !r.proved).collect();
    let queries = |eps: &[&EpisodeResult]| {
        mean(
            &eps.iter()
                .map(|r| r.queries_used as f64)
                .collect::<Vec<_>>(),
        )
    };
    let secs =
        |eps: &[&EpisodeResult]| mean(&eps.iter().map(|r| r.wall_seconds).collect::<Vec<_>>());
    AggregateStats {
        episodes: all.len(),
        avg_queries: Split {
            total: queries(&all),
            failure: queries(&fail),
            pass: queries(&pass),
        },
        seconds_per_proof: Split {
            total: secs(&all),
            failure: secs(&fail),
            pass: secs(&pass),
        },
        seconds_per_query: Split {
            total: per_query(&all),
            failure: per_query(&fail),
            pass: per_query(&pass),
        },
    }
}

/// Results grouped by tag. Untagged results are left out.
pub fn by_category(results: &[EpisodeResult]) -> BTreeMap<String, Vec<EpisodeResult>> {
    let mut out: BTreeMap<String, Vec<EpisodeResult>> = BTreeMap::new();
    for r in results {
        for t in &r.tags {
            out.entry(t.clone()).or_default().push(r.clone());
        }
    }
    out
}

/// Percentage with four significant digits, e.g. `29.10`.
pub fn format_percent(fraction: f64) -> String {
    let pct = fraction * 100.0;
    if pct == 0.0 || !pct.is_finite() {
        return format!("{pct:.3}");
    }
    let magnitude = pct.abs().log10().floor() as i32;
    let decimals = (3 - magnitude).max(0) as usize;
    format!("{pct:.decimals$}")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn synth(proved: usize, total: usize) -> Vec<EpisodeResult> {
        (0..total)
            .map(|i| {
                EpisodeResult::synthetic(
                    format!("t{i}"),
                    i < proved,
                    if i < proved { 10 } else { 60 },
                    1.0,
                )
            })
            .collect()
    }

    #[test]
    fn count_against_definition() {
        let rs = vec![
            EpisodeResult::synthetic("a", true, 5, 1.0),
            EpisodeResult::synthetic("b", true, 70, 1.0),
            EpisodeResult::synthetic("c", false, 60, 1.0),
        ];
        let r = pass_at_k_with_n_queries(&rs, 1, 60);
        assert_eq!((r.proved, r.population), (1, 3));
    }

    #[test]
    fn empty_results_flagged() {
        let r = pass_at_k_with_n_queries(&[], 1, 60);
        assert!(r.empty);
        assert_eq!(r.value, 0.0);
        assert!(pass_at_k_seconds(&[], 10.0).empty);
    }

    #[test]
    fn seconds_count() {
        let rs = vec![
            EpisodeResult::synthetic("a", true, 5, 39.0),
            EpisodeResult::synthetic("b", true, 5, 134.0),
        ];
        assert_eq!(pass_at_k_seconds(&rs, 100.0).value, 0.5);
        assert_eq!(pass_at_k_seconds(&rs, 30.0).value, 0.0);
    }

    #[test]
    fn only_first_k_attempts_count() {
        let mut second = EpisodeResult::synthetic("a", true, 3, 1.0);
        second.attempt = 2;
        let rs = vec![EpisodeResult::synthetic("a", false, 60, 1.0), second];
        assert_eq!(pass_at_k_with_n_queries(&rs, 1, 60).value, 0.0);
        assert_eq!(pass_at_k_with_n_queries(&rs, 2, 60).value, 1.0);
    }

    #[test]
    fn infrastructure_episodes_leave_the_denominator() {
        let mut broken = EpisodeResult::synthetic("b", false, 0, 0.0);
        broken.infrastructure_error = Some("adapter crashed".into());
        let rs = vec![EpisodeResult::synthetic("a", true, 3, 1.0), broken];
        let r = pass_at_k_with_n_queries(&rs, 1, 60);
        assert_eq!((r.proved, r.population), (1, 1));
        assert_eq!(aggregate_stats(&rs).episodes, 1);
    }

    #[test]
    fn singleton_stats() {
        let s = aggregate_stats(&[EpisodeResult::synthetic("a", true, 7, 70.0)]);
        assert_eq!(s.avg_queries.pass, Some(7.0));
        assert_eq!(s.seconds_per_proof.pass, Some(70.0));
        assert_eq!(s.seconds_per_query.pass, Some(10.0));
        assert_eq!(s.avg_queries.failure, None);
        assert_eq!(s.seconds_per_query.failure, None);
    }

    #[test]
    fn split_means() {
        let s = aggregate_stats(&[
            EpisodeResult::synthetic("a", true, 4, 1.0),
            EpisodeResult::synthetic("b", false, 28, 1.0),
        ]);
        assert_eq!(s.avg_queries.total, Some(16.0));
        assert_eq!(s.avg_queries.pass, Some(4.0));
        assert_eq!(s.avg_queries.failure, Some(28.0));
    }

    #[test]
    fn known_counts_as_percentages() {
        for (p, shown) in [(71, "29.10"), (73, "29.92"), (75, "30.74"), (65, "26.64")] {
            let r = pass_at_k_with_n_queries(&synth(p, 244), 1, 60);
            assert_eq!(format_percent(r.value), shown);
        }
        assert_eq!(format_percent(1.0), "100.0");
        assert_eq!(format_percent(0.05), "5.000");
        assert_eq!(format_percent(0.0), "0.000");
    }

    #[test]
    fn proved_fraction_at_max_queries() {
        let rs = synth(9, 20);
        assert_eq!(pass_at_k_with_n_queries(&rs, 1, 60).value, 9.0 / 20.0);
    }
}
