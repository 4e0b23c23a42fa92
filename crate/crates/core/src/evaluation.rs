//! Ranking quality metrics and their aggregation over cross-validation folds.

use std::collections::{BTreeMap, HashSet};
use std::fmt::Write as _;
use std::hash::Hash;

use serde::{Deserialize, Serialize};

/// Cutoffs reported for precision@k.
pub const K_GRID: [usize; 4] = [10, 25, 50, 100];
/// Recall level reported for precision-at-recall.
pub const RECALL_LEVEL: f64 = 0.15;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum EvalError {
    #[error("cutoff k = {k} is invalid for a list of {len}")]
    InvalidK { k: usize, len: usize },
    #[error("metric undefined: {0}")]
    Undefined(&'static str),
    #[error("invalid input: {0}")]
    InvalidInput(String),
}

pub fn precision_at_k<T: Eq + Hash>(ranked: &[T], relevant: &HashSet<T>, k: usize) -> Result<f64, EvalError> {
    if k == 0 || k > ranked.len() {
        return Err(EvalError::InvalidK { k, len: ranked.len() });
    }
    let hits = ranked[..k].iter().filter(|id| relevant.contains(id)).count();
    Ok(hits as f64 / k as f64)
}

pub fn recall_at_k<T: Eq + Hash>(ranked: &[T], relevant: &HashSet<T>, k: usize) -> Result<f64, EvalError> {
    if k == 0 || k > ranked.len() {
        return Err(EvalError::InvalidK { k, len: ranked.len() });
    }
    if relevant.is_empty() {
        return Err(EvalError::Undefined("recall with no relevant items"));
    }
    let hits = ranked[..k].iter().filter(|id| relevant.contains(id)).count();
    Ok(hits as f64 / relevant.len() as f64)
}

/// Precision at the first rank where `ceil(r * |relevant|)` relevant items
/// have been retrieved; 0 if the list never gets there.
pub fn precision_at_recall<T: Eq + Hash>(ranked: &[T], relevant: &HashSet<T>, r: f64) -> Result<f64, EvalError> {
    if relevant.is_empty() {
        return Err(EvalError::Undefined("precision at recall with no relevant items"));
    }
    if !(r > 0.0 && r <= 1.0) {
        return Err(EvalError::InvalidInput(format!("recall level {r} outside (0, 1]")));
    }
    // tolerate r * n landing a hair above an integer
    let needed = ((r * relevant.len() as f64) - 1e-9).ceil().max(1.0) as usize;
    let mut found = 0;
    for (pos, id) in ranked.iter().enumerate() {
        if relevant.contains(id) {
            found += 1;
            if found == needed {
                return Ok(needed as f64 / (pos + 1) as f64);
            }
        }
    }
    Ok(0.0)
}

/// Mean over all relevant items of the precision at that item's rank;
/// relevant items missing from the list contribute 0.
pub fn average_precision<T: Eq + Hash>(ranked: &[T], relevant: &HashSet<T>) -> Result<f64, EvalError> {
    if relevant.is_empty() {
        return Err(EvalError::Undefined("average precision with no relevant items"));
    }
    let mut found = 0;
    let mut sum = 0.0;
    for (pos, id) in ranked.iter().enumerate() {
        if relevant.contains(id) {
            found += 1;
            sum += found as f64 / (pos + 1) as f64;
        }
    }
    Ok(sum / relevant.len() as f64)
}

/// Mean and sample standard deviation of one metric.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricSummary {
    pub mean: Option<f64>,
    /// Sample standard deviation (n - 1 denominator); absent for fewer than two values.
    pub std: Option<f64>,
    pub n: usize,
}

impl MetricSummary {
    fn empty() -> Self {
        Self {
            mean: None,
            std: None,
            n: 0,
        }
    }
}

pub fn aggregate(values: &[f64]) -> Result<MetricSummary, EvalError> {
    if values.is_empty() {
        return Err(EvalError::InvalidInput("no values to aggregate".into()));
    }
    let n = values.len();
    let mean = values.iter().sum::<f64>() / n as f64;
    let std = (n >= 2).then(|| {
        let ss: f64 = values.iter().map(|v| (v - mean) * (v - mean)).sum();
        (ss / (n - 1) as f64).sqrt()
    });
    Ok(MetricSummary {
        mean: Some(mean),
        std,
        n,
    })
}

fn summarize(values: impl Iterator<Item = Option<f64>>) -> MetricSummary {
    let v: Vec<f64> = values.flatten().collect();
    aggregate(&v).unwrap_or_else(|_| MetricSummary::empty())
}

/// Metrics of one ranking. A metric is `None` when undefined for that
/// ranking (cutoff longer than the list, no relevant items).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankingMetrics {
    pub precision_at_k: BTreeMap<usize, Option<f64>>,
    pub precision_at_recall: Option<f64>,
    pub average_precision: Option<f64>,
}

pub fn ranking_metrics<T: Eq + Hash>(ranked: &[T], relevant: &HashSet<T>) -> RankingMetrics {
    RankingMetrics {
        precision_at_k: K_GRID
            .iter()
            .map(|&k| (k, precision_at_k(ranked, relevant, k).ok()))
            .collect(),
        precision_at_recall: precision_at_recall(ranked, relevant, RECALL_LEVEL).ok(),
        average_precision: average_precision(ranked, relevant).ok(),
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct EvalCounts {
    pub folds: usize,
    pub repeats: usize,
    pub labeled_images: usize,
    pub relevant_images: usize,
    /// Number of rankings the summaries were computed over.
    pub evaluations: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub precision_at_k: BTreeMap<usize, MetricSummary>,
    pub recall_level: f64,
    pub precision_at_recall: MetricSummary,
    pub average_precision: MetricSummary,
    pub counts: EvalCounts,
    /// Precision at every cutoff 1..=n; only filled for single-ranking reports.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub curve: Vec<f64>,
}

impl EvalReport {
    pub fn from_metrics(runs: &[RankingMetrics], counts: EvalCounts) -> Self {
        Self {
            precision_at_k: K_GRID
                .iter()
                .map(|k| (*k, summarize(runs.iter().map(|r| r.precision_at_k.get(k).copied().flatten()))))
                .collect(),
            recall_level: RECALL_LEVEL,
            precision_at_recall: summarize(runs.iter().map(|r| r.precision_at_recall)),
            average_precision: summarize(runs.iter().map(|r| r.average_precision)),
            counts: EvalCounts {
                evaluations: runs.len(),
                ..counts
            },
            curve: Vec::new(),
        }
    }

    /// Report for one ranking, including the full precision@k curve.
    pub fn single<T: Eq + Hash>(ranked: &[T], relevant: &HashSet<T>) -> Self {
        let mut report = Self::from_metrics(
            &[ranking_metrics(ranked, relevant)],
            EvalCounts {
                folds: 1,
                repeats: 1,
                labeled_images: ranked.len(),
                relevant_images: relevant.len(),
                evaluations: 1,
            },
        );
        report.curve = (1..=ranked.len())
            .map(|k| precision_at_k(ranked, relevant, k).expect("k within list"))
            .collect();
        report
    }

    /// Plain-text table: metric, mean, std, n.
    pub fn to_table(&self) -> String {
        let fmt = |v: Option<f64>| v.map_or_else(|| "-".to_string(), |x| format!("{x:.4}"));
        let mut rows: Vec<(String, MetricSummary)> = self
            .precision_at_k
            .iter()
            .map(|(k, s)| (format!("P@{k}"), *s))
            .collect();
        rows.push((format!("P@R{:.0}%", self.recall_level * 100.0), self.precision_at_recall));
        rows.push(("AP".to_string(), self.average_precision));
        let mut out = format!("{:<10} {:>8} {:>8} {:>5}\n", "metric", "mean", "std", "n");
        for (name, s) in rows {
            let _ = writeln!(out, "{:<10} {:>8} {:>8} {:>5}", name, fmt(s.mean), fmt(s.std), s.n);
        }
        out
    }

    /// `k,precision` lines for the precision@k curve.
    pub fn curve_csv(&self) -> String {
        let mut out = String::from("k,precision\n");
        for (i, p) in self.curve.iter().enumerate() {
            let _ = writeln!(out, "{},{}", i + 1, p);
        }
        out
    }
}
