//! Aggregation of run results across seeds, plus closed-form resource
//! calculators and the CSV/metadata writers.

mod calc;
mod output;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};
use thiserror::Error;

pub use calc::{buffer_estimate, scale_bytes, teci_alloc, UnitBase};
pub use output::{fmt_g, metadata_text, render_csv, SweepRow, CSV_HEADER};

use crate::engine::{Drops, RunResult};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ReportError {
    #[error("no runs to summarize")]
    EmptyInput,
    #[error("run {index} has a different configuration from run 0 (first difference: {key})")]
    MixedScenarios { index: usize, key: String },
    #[error("run {index} reports {delivered} deliveries but only {expected} are possible")]
    Inconsistent { index: usize, delivered: u64, expected: u64 },
    #[error("no deliveries are expected, so delivery probability is undefined")]
    NothingExpected,
    #[error("result does not fit in 128 bits")]
    Overflow,
    #[error("{0} must be at least 1")]
    ZeroInput(&'static str),
}

/// How the 95% interval half-width is computed.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Interval {
    /// `1.96 * s / sqrt(n)`.
    #[default]
    Normal,
    /// Student-t quantile with `n - 1` degrees of freedom.
    StudentT,
}

impl Interval {
    pub fn name(self) -> &'static str {
        match self {
            Interval::Normal => "normal_z1.96",
            Interval::StudentT => "student_t",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Estimate {
    pub mean: f64,
    /// Half-width of the 95% interval; zero for a single sample.
    pub half_width: f64,
    pub samples: usize,
}

impl Estimate {
    pub fn lower(&self) -> f64 {
        self.mean - self.half_width
    }

    pub fn upper(&self) -> f64 {
        self.mean + self.half_width
    }
}

/// Mean and 95% interval of `values`. `None` for an empty slice.
pub fn estimate(values: &[f64], interval: Interval) -> Option<Estimate> {
    let n = values.len();
    if n == 0 {
        return None;
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return Some(Estimate {
            mean,
            half_width: 0.0,
            samples: 1,
        });
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    let quantile = match interval {
        Interval::Normal => 1.96,
        Interval::StudentT => StudentsT::new(0.0, 1.0, (n - 1) as f64)
            .expect("n > 1 gives positive degrees of freedom")
            .inverse_cdf(0.975),
    };
    Some(Estimate {
        mean,
        half_width: quantile * var.sqrt() / (n as f64).sqrt(),
        samples: n,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricsSummary {
    pub runs: usize,
    pub expected: u64,
    pub delivery_probability: Estimate,
    /// Replicas per delivered message; absent when no run delivered.
    pub cost: Option<Estimate>,
    /// Seconds from creation to delivery; absent when no run delivered.
    pub latency: Option<Estimate>,
    /// Runs without deliveries, left out of cost and latency.
    pub excluded_runs: usize,
    /// Mean drops per run.
    pub drops_ttl: f64,
    pub drops_eviction: f64,
    pub drops_no_fit: f64,
    pub drops_aborted: f64,
}

fn first_difference(a: &BTreeMap<String, String>, b: &BTreeMap<String, String>) -> Option<String> {
    a.keys()
        .chain(b.keys())
        .find(|k| a.get(*k) != b.get(*k))
        .cloned()
}

pub fn summarize(results: &[RunResult], expected: u64) -> Result<MetricsSummary, ReportError> {
    summarize_with(results, expected, Interval::Normal)
}

pub fn summarize_with(results: &[RunResult], expected: u64, interval: Interval) -> Result<MetricsSummary, ReportError> {
    let first = results.first().ok_or(ReportError::EmptyInput)?;
    if expected == 0 {
        return Err(ReportError::NothingExpected);
    }
    let mut dp = Vec::with_capacity(results.len());
    let mut cost = Vec::new();
    let mut latency = Vec::new();
    let mut drops = Drops::default();
    for (index, r) in results.iter().enumerate() {
        if let Some(key) = first_difference(&first.config, &r.config) {
            return Err(ReportError::MixedScenarios { index, key });
        }
        let delivered = r.deliveries.len() as u64;
        if delivered > expected {
            return Err(ReportError::Inconsistent {
                index,
                delivered,
                expected,
            });
        }
        dp.push(delivered as f64 / expected as f64);
        if delivered > 0 {
            cost.push(r.forwardings as f64 / delivered as f64);
            latency.push(r.deliveries.iter().map(|d| d.latency()).sum::<f64>() / delivered as f64);
        }
        drops.ttl += r.drops.ttl;
        drops.eviction += r.drops.eviction;
        drops.no_fit += r.drops.no_fit;
        drops.aborted += r.drops.aborted;
    }
    let n = results.len() as f64;
    Ok(MetricsSummary {
        runs: results.len(),
        expected,
        delivery_probability: estimate(&dp, interval).expect("at least one run"),
        cost: estimate(&cost, interval),
        latency: estimate(&latency, interval),
        excluded_runs: results.len() - cost.len(),
        drops_ttl: drops.ttl as f64 / n,
        drops_eviction: drops.eviction as f64 / n,
        drops_no_fit: drops.no_fit as f64 / n,
        drops_aborted: drops.aborted as f64 / n,
    })
}
