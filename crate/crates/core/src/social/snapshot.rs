//! Flat text dump of social state: `node,kind,key,sample,value`.
//!
//! Rows are sorted by `(node, kind, key, sample)`. Values use the shortest
//! decimal that reads back to the same `f64`. Columns that do not apply are
//! written as `-`.

use std::fmt::Write as _;

use thiserror::Error;

use super::{CentralityState, CommunityState, InterestSocialState, PeerSocialState};
use crate::model::NodeId;

pub const HEADER: &str = "node,kind,key,sample,value";

#[derive(Debug, Clone, PartialEq)]
pub struct SnapshotRow {
    pub node: NodeId,
    pub kind: String,
    pub key: Option<u32>,
    pub sample: Option<usize>,
    pub value: f64,
}

impl SnapshotRow {
    fn sort_key(&self) -> (NodeId, &str, Option<u32>, Option<usize>) {
        (self.node, self.kind.as_str(), self.key, self.sample)
    }
}

fn cell_rows<K: Ord + Copy + Into<u32>>(
    node: NodeId,
    prefix: &str,
    state: &super::TimeEvolvingWeights<K>,
    rows: &mut Vec<SnapshotRow>,
) {
    for key in state.keys() {
        for sample in 0..state.samples_per_day() {
            let row = |kind: &str, value: f64| SnapshotRow {
                node,
                kind: format!("{prefix}{kind}"),
                key: Some(key.into()),
                sample: Some(sample),
                value,
            };
            rows.push(row("tcti", state.tcti(key, sample)));
            rows.push(row("atcti", state.atcti(key, sample)));
            rows.push(row("days", f64::from(state.days_observed(key, sample))));
            rows.push(row("weight", state.weight(key, sample)));
        }
    }
}

pub fn interest_rows(state: &InterestSocialState) -> Vec<SnapshotRow> {
    let mut rows = Vec::new();
    cell_rows(state.owner(), "interest.", state, &mut rows);
    rows
}

pub fn peer_rows(state: &PeerSocialState) -> Vec<SnapshotRow> {
    let node = state.weights.owner();
    let mut rows = Vec::new();
    cell_rows(node, "peer.", &state.weights, &mut rows);
    rows.push(SnapshotRow {
        node,
        kind: "importance".into(),
        key: None,
        sample: None,
        value: state.importance,
    });
    rows
}

pub fn community_rows(state: &CommunityState) -> Vec<SnapshotRow> {
    let node = state.owner();
    let mut rows = Vec::new();
    for &peer in state.local_community() {
        rows.push(SnapshotRow {
            node,
            kind: "community".into(),
            key: Some(peer.0),
            sample: None,
            value: if state.familiar_set().contains(&peer) { 2.0 } else { 1.0 },
        });
    }
    rows
}

pub fn centrality_rows(state: &CentralityState) -> Vec<SnapshotRow> {
    let node = state.owner();
    vec![
        SnapshotRow {
            node,
            kind: "centrality.global".into(),
            key: None,
            sample: None,
            value: state.global_centrality(),
        },
        SnapshotRow {
            node,
            kind: "centrality.local".into(),
            key: None,
            sample: None,
            value: state.local_centrality(),
        },
    ]
}

pub fn render(mut rows: Vec<SnapshotRow>) -> String {
    rows.sort_by(|a, b| a.sort_key().cmp(&b.sort_key()));
    let mut out = String::from(HEADER);
    out.push('\n');
    let dash = |v: Option<String>| v.unwrap_or_else(|| "-".into());
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{}",
            r.node,
            r.kind,
            dash(r.key.map(|k| k.to_string())),
            dash(r.sample.map(|s| s.to_string())),
            r.value
        );
    }
    out
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("snapshot line {line}: {reason}")]
pub struct SnapshotError {
    pub line: usize,
    pub reason: String,
}

pub fn parse(text: &str) -> Result<Vec<SnapshotRow>, SnapshotError> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h == HEADER => {}
        _ => {
            return Err(SnapshotError {
                line: 1,
                reason: "missing header".into(),
            })
        }
    }
    let mut rows = Vec::new();
    for (idx, line) in lines {
        if line.is_empty() {
            continue;
        }
        let err = |reason: &str| SnapshotError {
            line: idx + 1,
            reason: reason.to_string(),
        };
        let fields: Vec<&str> = line.split(',').collect();
        let [node, kind, key, sample, value] = fields[..] else {
            return Err(err("expected 5 columns"));
        };
        let opt = |s: &str| -> Result<Option<u64>, SnapshotError> {
            if s == "-" {
                Ok(None)
            } else {
                s.parse().map(Some).map_err(|_| err("bad integer"))
            }
        };
        rows.push(SnapshotRow {
            node: NodeId(node.parse().map_err(|_| err("bad node"))?),
            kind: kind.to_string(),
            key: opt(key)?.map(|k| k as u32),
            sample: opt(sample)?.map(|s| s as usize),
            value: value.parse().map_err(|_| err("bad value"))?,
        });
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{InterestId, SampleSlot};

    #[test]
    fn render_then_parse() {
        let mut s = InterestSocialState::new(NodeId(3), 2);
        s.accrue([InterestId(1)], 0, 0.1);
        s.close_slot(SampleSlot { day: 1, sample: 0 }).unwrap();
        s.accrue([InterestId(1)], 1, 1.0 / 3.0);
        let text = render(interest_rows(&s));
        assert!(text.starts_with("node,kind,key,sample,value\n"));
        assert!(text.contains("3,interest.atcti,1,0,0.1\n"));
        let back = parse(&text).unwrap();
        assert_eq!(render(back), text);
    }
}
