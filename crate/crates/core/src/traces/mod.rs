//! Contact traces: the text format, pairwise interval merging, a Poisson
//! generator and summary statistics.
//!
//! A trace file holds one contact per line, `a b start end`, with node ids
//! as integers and times in seconds. `#` starts a comment that runs to the
//! end of the line and blank lines are ignored.

mod stats;
mod synthetic;

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io::BufRead;

use thiserror::Error;

pub use stats::{trace_stats, HistogramBin, StatsError, TraceStats, HISTOGRAM_EDGES};
pub use synthetic::{generate_synthetic, GroupConfig, SyntheticConfig, SyntheticError, Window};

use crate::model::{Contact, NodeId, SimTime};

/// One line of a trace file, canonicalized.
pub type TraceRecord = Contact;

#[derive(Debug, Error)]
pub enum ParseError {
    #[error("line {line}: {reason}")]
    Malformed { line: usize, reason: String },
    #[error("reading trace: {0}")]
    Io(#[from] std::io::Error),
}

impl ParseError {
    pub fn line(&self) -> Option<usize> {
        match self {
            ParseError::Malformed { line, .. } => Some(*line),
            ParseError::Io(_) => None,
        }
    }
}

fn parse_line(text: &str, line: usize) -> Result<Option<Contact>, ParseError> {
    let err = |reason: String| ParseError::Malformed { line, reason };
    let body = text.split('#').next().unwrap_or("");
    let fields: Vec<&str> = body.split_whitespace().collect();
    if fields.is_empty() {
        return Ok(None);
    }
    let [a, b, start, end] = fields[..] else {
        return Err(err(format!("expected 4 fields `a b start end`, found {}", fields.len())));
    };
    let node = |s: &str| s.parse::<u32>().map(NodeId).map_err(|_| err(format!("bad node id `{s}`")));
    let time = |s: &str| {
        s.parse::<f64>()
            .ok()
            .and_then(SimTime::new)
            .filter(|t| t.secs() >= 0.0)
            .ok_or_else(|| err(format!("bad time `{s}`")))
    };
    let contact = Contact::new(node(a)?, node(b)?, time(start)?, time(end)?).map_err(|e| err(e.to_string()))?;
    Ok(Some(contact))
}

/// Reads a trace, canonicalizes every record, merges overlapping intervals
/// of the same pair and sorts by start time.
pub fn parse_trace<R: BufRead>(reader: R) -> Result<Vec<TraceRecord>, ParseError> {
    let mut out = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        if let Some(c) = parse_line(&line?, idx + 1)? {
            out.push(c);
        }
    }
    Ok(merge(out))
}

pub fn parse_str(text: &str) -> Result<Vec<TraceRecord>, ParseError> {
    parse_trace(text.as_bytes())
}

/// Unions the intervals of each pair. Intervals that overlap or touch
/// become one contact. The result is sorted by `(start, a, b)`.
pub fn merge(records: Vec<TraceRecord>) -> Vec<TraceRecord> {
    let mut by_pair: BTreeMap<(NodeId, NodeId), Vec<(SimTime, SimTime)>> = BTreeMap::new();
    for r in records {
        by_pair.entry((r.a(), r.b())).or_default().push((r.start(), r.end()));
    }
    let mut out = Vec::new();
    for ((a, b), mut spans) in by_pair {
        spans.sort();
        let mut current = spans[0];
        for &(s, e) in &spans[1..] {
            if s <= current.1 {
                current.1 = current.1.max(e);
            } else {
                out.push(Contact::new(a, b, current.0, current.1).expect("non-empty span"));
                current = (s, e);
            }
        }
        out.push(Contact::new(a, b, current.0, current.1).expect("non-empty span"));
    }
    sort_records(&mut out);
    out
}

pub fn sort_records(records: &mut [TraceRecord]) {
    records.sort_by_key(|x| (x.start(), x.a(), x.b(), x.end()));
}

/// Writes records in the canonical text form with millisecond precision.
pub fn serialize(records: &[TraceRecord]) -> String {
    let mut sorted = records.to_vec();
    sort_records(&mut sorted);
    let mut out = String::new();
    for r in &sorted {
        let _ = writeln!(out, "{} {} {:.3} {:.3}", r.a(), r.b(), r.start().secs(), r.end().secs());
    }
    out
}

#[cfg(test)]
mod tests {
    use proptest::prelude::*;

    use super::*;

    fn c(a: u32, b: u32, s: f64, e: f64) -> Contact {
        Contact::new(NodeId(a), NodeId(b), SimTime::from_secs(s), SimTime::from_secs(e)).unwrap()
    }

    #[test]
    fn single_line() {
        assert_eq!(parse_str("1 2 10 20").unwrap(), vec![c(1, 2, 10.0, 20.0)]);
    }

    #[test]
    fn reversed_pair_is_canonical() {
        let got = parse_str("2 1 10 20\n").unwrap();
        assert_eq!((got[0].a(), got[0].b()), (NodeId(1), NodeId(2)));
    }

    #[test]
    fn overlapping_intervals_merge() {
        let got = parse_str("1 2 10 20\n1 2 15 30\n").unwrap();
        assert_eq!(got, vec![c(1, 2, 10.0, 30.0)]);
    }

    #[test]
    fn comments_and_blanks() {
        let text = "# header\n\n3 4 5.5 6.25  # trailing\n   \n0 9 1 2\n";
        let got = parse_str(text).unwrap();
        assert_eq!(got, vec![c(0, 9, 1.0, 2.0), c(3, 4, 5.5, 6.25)]);
    }

    #[test]
    fn errors_carry_line_numbers() {
        for (text, line) in [
            ("1 2 10 20\n1 2 10\n", 2),
            ("1 1 10 20\n", 1),
            ("\n\n1 2 20 10\n", 3),
            ("1 x 1 2\n", 1),
            ("1 2 -1 2\n", 1),
            ("1 2 1 inf\n", 1),
        ] {
            let err = parse_str(text).unwrap_err();
            assert_eq!(err.line(), Some(line), "{text:?}: {err}");
        }
    }

    #[test]
    fn serialize_format() {
        let text = serialize(&[c(2, 1, 10.0, 20.5)]);
        assert_eq!(text, "1 2 10.000 20.500\n");
    }

    // Coverage oracle on an integer grid: unit cell [t, t+1) is covered iff
    // some input interval contains it.
    fn covered(spans: &[(u32, u32)]) -> Vec<bool> {
        let mut grid = vec![false; 200];
        for &(s, e) in spans {
            for cell in grid.iter_mut().take(e as usize).skip(s as usize) {
                *cell = true;
            }
        }
        grid
    }

    fn arb_spans() -> impl Strategy<Value = Vec<(u32, u32)>> {
        prop::collection::vec((0u32..150, 1u32..40).prop_map(|(s, len)| (s, s + len)), 1..12)
    }

    proptest! {
        #[test]
        fn merge_matches_interval_union(spans in arb_spans()) {
            let records: Vec<Contact> = spans.iter().map(|&(s, e)| c(0, 1, s as f64, e as f64)).collect();
            let merged = merge(records);
            let back: Vec<(u32, u32)> = merged.iter().map(|r| (r.start().secs() as u32, r.end().secs() as u32)).collect();
            prop_assert_eq!(covered(&back), covered(&spans));
            // merged spans are disjoint and do not touch
            for w in merged.windows(2) {
                prop_assert!(w[0].end() < w[1].start());
            }
        }

        #[test]
        fn merge_idempotent_and_order_free(spans in arb_spans(), pairs in prop::collection::vec((0u32..4, 0u32..4), 12)) {
            let records: Vec<Contact> = spans
                .iter()
                .zip(pairs.iter())
                .filter(|(_, (a, b))| a != b)
                .map(|(&(s, e), &(a, b))| c(a, b, s as f64, e as f64))
                .collect();
            prop_assume!(!records.is_empty());
            let once = merge(records.clone());
            prop_assert_eq!(merge(once.clone()), once.clone());
            let mut reversed = records;
            reversed.reverse();
            prop_assert_eq!(merge(reversed), once);
        }

        #[test]
        fn parse_serialize_roundtrip(spans in arb_spans(), pairs in prop::collection::vec((0u32..6, 0u32..6), 12), ms in prop::collection::vec(0u32..1000, 12)) {
            let records: Vec<Contact> = spans
                .iter()
                .zip(pairs.iter())
                .zip(ms.iter())
                .filter(|((_, (a, b)), _)| a != b)
                .map(|((&(s, e), &(a, b)), &frac)| c(a, b, f64::from(s * 1000 + frac) / 1000.0, e as f64 + 0.5))
                .collect();
            prop_assume!(!records.is_empty());
            let canonical = merge(records);
            let text = serialize(&canonical);
            let back = parse_str(&text).unwrap();
            prop_assert_eq!(&back, &canonical);
            prop_assert_eq!(serialize(&back), text);
        }
    }
}
