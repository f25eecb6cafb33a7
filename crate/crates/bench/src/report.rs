//! Metrics reports: built from episode results only, rendered as JSON, CSV
//! and a plain-text table.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::metrics::{
    aggregate_stats, by_category, format_percent, pass_at_k_seconds, pass_at_k_with_n_queries,
    AggregateStats, EpisodeResult, PassRate, Split,
};

/// Grid points at which the pass rates are evaluated.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportSpec {
    pub attempts: Vec<u32>,
    pub queries: Vec<u32>,
    pub seconds: Vec<f64>,
}

impl Default for ReportSpec {
    fn default() -> Self {
        Self {
            attempts: vec![1],
            queries: vec![1, 5, 10, 20, 40, 60],
            seconds: vec![1.0, 10.0, 60.0, 100.0, 300.0, 600.0],
        }
    }
}

impl ReportSpec {
    /// Adds `k = 1..=attempts` and the configured query cap to the grid.
    pub fn covering(mut self, attempts: u32, max_queries: u32) -> Self {
        self.attempts.extend(1..=attempts);
        self.attempts.sort_unstable();
        self.attempts.dedup();
        if !self.queries.contains(&max_queries) {
            self.queries.push(max_queries);
            self.queries.sort_unstable();
        }
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueryCell {
    pub k: u32,
    pub n: u32,
    pub rate: PassRate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SecondsCell {
    pub k: f64,
    pub rate: PassRate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CategoryRow {
    pub tag: String,
    pub theorems: usize,
    pub proved: usize,
    pub rate: f64,
    pub stats: AggregateStats,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub theorems: usize,
    pub episodes: usize,
    /// `theorem#attempt: message` for episodes left out of every metric.
    pub excluded: Vec<String>,
    pub pass_at_k_with_n_queries: Vec<QueryCell>,
    pub pass_at_k_seconds: Vec<SecondsCell>,
    pub stats: AggregateStats,
    pub categories: Vec<CategoryRow>,
}

fn stats_without_time(mut s: AggregateStats) -> AggregateStats {
    let blank = Split {
        total: None,
        failure: None,
        pass: None,
    };
    s.seconds_per_proof = blank;
    s.seconds_per_query = blank;
    s
}

impl MetricsReport {
    pub fn build(results: &[EpisodeResult], spec: &ReportSpec) -> Self {
        let mut sorted = results.to_vec();
        // Total order so float sums do not depend on input order.
        sorted.sort_by(|a, b| {
            (&a.theorem, a.attempt, a.proved, a.queries_used)
                .cmp(&(&b.theorem, b.attempt, b.proved, b.queries_used))
                .then(a.wall_seconds.total_cmp(&b.wall_seconds))
                .then_with(|| a.infrastructure_error.cmp(&b.infrastructure_error))
                .then_with(|| a.tags.cmp(&b.tags))
        });
        let results = &sorted[..];

        let mut grid = Vec::new();
        for &k in &spec.attempts {
            for &n in &spec.queries {
                grid.push(QueryCell {
                    k,
                    n,
                    rate: pass_at_k_with_n_queries(results, k, n),
                });
            }
        }
        let seconds = spec
            .seconds
            .iter()
            .map(|&k| SecondsCell {
                k,
                rate: pass_at_k_seconds(results, k),
            })
            .collect();
        let categories = by_category(results)
            .into_iter()
            .map(|(tag, rs)| {
                let any = pass_at_k_with_n_queries(&rs, u32::MAX, u32::MAX);
                CategoryRow {
                    tag,
                    theorems: any.population,
                    proved: any.proved,
                    rate: any.value,
                    stats: aggregate_stats(&rs),
                }
            })
            .collect();
        let everything = pass_at_k_with_n_queries(results, u32::MAX, u32::MAX);
        Self {
            theorems: everything.population,
            episodes: results.iter().filter(|r| !r.is_infrastructure()).count(),
            excluded: results
                .iter()
                .filter_map(|r| {
                    r.infrastructure_error
                        .as_ref()
                        .map(|m| format!("{}#{}: {m}", r.theorem, r.attempt))
                })
                .collect(),
            pass_at_k_with_n_queries: grid,
            pass_at_k_seconds: seconds,
            stats: aggregate_stats(results),
            categories,
        }
    }

    /// Copy with every field derived from wall-clock time removed.
    pub fn without_wall_clock(&self) -> Self {
        let mut r = self.clone();
        r.pass_at_k_seconds.clear();
        r.stats = stats_without_time(r.stats);
        for c in &mut r.categories {
            c.stats = stats_without_time(c.stats.clone());
        }
        r
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("reports always serialize");
        s.push('\n');
        s
    }

    /// Long-format CSV: one value per row.
    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        let row = |w: &mut csv::Writer<Vec<u8>>,
                   m: &str,
                   k: String,
                   n: String,
                   subset: &str,
                   v: Option<f64>| {
            w.write_record([
                m,
                &k,
                &n,
                subset,
                &v.map(|v| format!("{v:.6}")).unwrap_or_default(),
            ])
            .expect("writing to memory");
        };
        w.write_record(["metric", "k", "n", "subset", "value"])
            .expect("writing to memory");
        for c in &self.pass_at_k_with_n_queries {
            row(
                &mut w,
                "pass_at_k_with_n_queries",
                c.k.to_string(),
                c.n.to_string(),
                "all",
                Some(c.rate.value),
            );
        }
        for c in &self.pass_at_k_seconds {
            row(
                &mut w,
                "pass_at_k_seconds",
                c.k.to_string(),
                String::new(),
                "all",
                Some(c.rate.value),
            );
        }
        let split = |w: &mut csv::Writer<Vec<u8>>, m: &str, subset: &str, s: &Split| {
            row(
                w,
                &format!("{m}_total"),
                String::new(),
                String::new(),
                subset,
                s.total,
            );
            row(
                w,
                &format!("{m}_failure"),
                String::new(),
                String::new(),
                subset,
                s.failure,
            );
            row(
                w,
                &format!("{m}_pass"),
                String::new(),
                String::new(),
                subset,
                s.pass,
            );
        };
        let stats = |w: &mut csv::Writer<Vec<u8>>, subset: &str, s: &AggregateStats| {
            split(w, "avg_queries", subset, &s.avg_queries);
            split(w, "seconds_per_proof", subset, &s.seconds_per_proof);
            split(w, "seconds_per_query", subset, &s.seconds_per_query);
        };
        stats(&mut w, "all", &self.stats);
        for c in &self.categories {
            row(
                &mut w,
                "proved_fraction",
                String::new(),
                String::new(),
                &format!("tag:{}", c.tag),
                Some(c.rate),
            );
            stats(&mut w, &format!("tag:{}", c.tag), &c.stats);
        }
        String::from_utf8(w.into_inner().expect("flushing memory")).expect("csv is utf-8")
    }

    pub fn render_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "theorems {}  episodes {}  excluded {}",
            self.theorems,
            self.episodes,
            self.excluded.len()
        );
        for e in &self.excluded {
            let _ = writeln!(out, "  excluded {e}");
        }
        let _ = writeln!(out, "\npass@k-with-n-queries");
        for c in &self.pass_at_k_with_n_queries {
            let _ = writeln!(
                out,
                "  k={:<3} n={:<5} {:>7}%  ({}/{})",
                c.k,
                c.n,
                format_percent(c.rate.value),
                c.rate.proved,
                c.rate.population
            );
        }
        if !self.pass_at_k_seconds.is_empty() {
            let _ = writeln!(out, "\npass@k-seconds");
            for c in &self.pass_at_k_seconds {
                let _ = writeln!(
                    out,
                    "  k={:<7} {:>7}%  ({}/{})",
                    c.k,
                    format_percent(c.rate.value),
                    c.rate.proved,
                    c.rate.population
                );
            }
        }
        let _ = writeln!(out);
        out.push_str(&stats_table(&self.stats));
        for c in &self.categories {
            let _ = writeln!(
                out,
                "\ncategory {}: {}/{} proved ({}%)",
                c.tag,
                c.proved,
                c.theorems,
                format_percent(c.rate)
            );
            out.push_str(&stats_table(&c.stats));
        }
        out
    }
}

fn cell(v: Option<f64>) -> String {
    v.map(|v| format!("{v:.2}")).unwrap_or_else(|| "-".into())
}

fn stats_table(s: &AggregateStats) -> String {
    let mut out = format!(
        "  {:<22}{:>10}{:>10}{:>10}\n",
        "", "Total", "Failure", "Pass"
    );
    for (label, split) in [
        ("Avg. queries", &s.avg_queries),
        ("Seconds per proof", &s.seconds_per_proof),
        ("Seconds per query", &s.seconds_per_query),
    ] {
        let _ = writeln!(
            out,
            "  {:<22}{:>10}{:>10}{:>10}",
            label,
            cell(split.total),
            cell(split.failure),
            cell(split.pass)
        );
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> Vec<EpisodeResult> {
        let mut a = EpisodeResult::synthetic("a", true, 4, 2.0);
        a.tags = vec!["logic".into()];
        let mut b = EpisodeResult::synthetic("b", false, 28, 8.0);
        b.tags = vec!["logic".into(), "equality".into()];
        vec![b, a]
    }

    #[test]
    fn layout_has_total_failure_pass_columns() {
        let text = MetricsReport::build(&sample(), &ReportSpec::default()).render_text();
        assert!(text.contains("Total") && text.contains("Failure") && text.contains("Pass"));
        assert!(text.contains("Avg. queries"));
        assert!(text.contains("category logic: 1/2 proved (50.00%)"));
    }

    #[test]
    fn absent_fields_are_not_zero() {
        let r = MetricsReport::build(
            &[EpisodeResult::synthetic("a", true, 7, 70.0)],
            &ReportSpec::default(),
        );
        assert!(r.render_text().contains("-"));
        assert!(r.to_csv().contains("avg_queries_failure,,,all,\n"));
    }

    #[test]
    fn input_order_does_not_matter() {
        let spec = ReportSpec::default();
        let mut rev = sample();
        rev.reverse();
        assert_eq!(
            MetricsReport::build(&sample(), &spec).to_json(),
            MetricsReport::build(&rev, &spec).to_json()
        );
    }

    #[test]
    fn json_round_trip() {
        let r = MetricsReport::build(&sample(), &ReportSpec::default());
        let back: MetricsReport = serde_json::from_str(&r.to_json()).unwrap();
        assert_eq!(back, r);
    }

    #[test]
    fn covering_adds_cap_and_attempts() {
        let s = ReportSpec::default().covering(3, 100);
        assert_eq!(s.attempts, [1, 2, 3]);
        assert_eq!(*s.queries.last().unwrap(), 100);
    }
}
