use std::collections::BTreeMap;
use std::fmt;

use serde::Serialize;
use thiserror::Error;

use super::TraceRecord;
use crate::model::NodeId;

/// Lower edges of the duration histogram in seconds; the last bin is open.
pub const HISTOGRAM_EDGES: [f64; 6] = [0.0, 60.0, 300.0, 900.0, 3600.0, 14_400.0];

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum StatsError {
    #[error("trace has no contacts")]
    EmptyTrace,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HistogramBin {
    pub lower: f64,
    /// `None` for the open last bin.
    pub upper: Option<f64>,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TraceStats {
    pub contacts: usize,
    pub nodes: usize,
    /// Seconds from the first start to the last end.
    pub span: f64,
    pub contacts_per_hour: f64,
    pub mean_duration: f64,
    /// Summed contact seconds per pair.
    pub pair_totals: BTreeMap<(NodeId, NodeId), f64>,
    pub histogram: Vec<HistogramBin>,
}

pub fn trace_stats(records: &[TraceRecord]) -> Result<TraceStats, StatsError> {
    let first = records.iter().map(|r| r.start()).min().ok_or(StatsError::EmptyTrace)?;
    let last = records.iter().map(|r| r.end()).max().ok_or(StatsError::EmptyTrace)?;
    let span = last.since(first);
    let mut pair_totals = BTreeMap::new();
    let mut nodes = std::collections::BTreeSet::new();
    let mut histogram: Vec<HistogramBin> = HISTOGRAM_EDGES
        .iter()
        .enumerate()
        .map(|(i, &lower)| HistogramBin {
            lower,
            upper: HISTOGRAM_EDGES.get(i + 1).copied(),
            count: 0,
        })
        .collect();
    let mut total = 0.0;
    for r in records {
        let d = r.duration();
        total += d;
        *pair_totals.entry((r.a(), r.b())).or_insert(0.0) += d;
        nodes.insert(r.a());
        nodes.insert(r.b());
        let bin = HISTOGRAM_EDGES.iter().rposition(|&lo| d >= lo).unwrap_or(0);
        histogram[bin].count += 1;
    }
    Ok(TraceStats {
        contacts: records.len(),
        nodes: nodes.len(),
        span,
        contacts_per_hour: records.len() as f64 / (span / 3600.0),
        mean_duration: total / records.len() as f64,
        pair_totals,
        histogram,
    })
}

impl fmt::Display for TraceStats {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "contacts={}", self.contacts)?;
        writeln!(f, "nodes={}", self.nodes)?;
        writeln!(f, "pairs={}", self.pair_totals.len())?;
        writeln!(f, "span_s={}", self.span)?;
        writeln!(f, "contacts_per_hour={}", self.contacts_per_hour)?;
        writeln!(f, "mean_duration_s={}", self.mean_duration)?;
        for bin in &self.histogram {
            match bin.upper {
                Some(up) => writeln!(f, "duration[{},{})={}", bin.lower, up, bin.count)?,
                None => writeln!(f, "duration[{},inf)={}", bin.lower, bin.count)?,
            }
        }
        Ok(())
    }
}
