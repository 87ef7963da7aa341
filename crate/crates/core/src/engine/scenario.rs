use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{Addressing, Capacity, InterestId, Message, MessageId, NodeId, SampleClock};
use crate::protocols::Protocol;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("{field}: {reason}")]
pub struct ConfigError {
    pub field: String,
    pub reason: String,
}

impl ConfigError {
    pub fn new(field: impl Into<String>, reason: impl Into<String>) -> Self {
        ConfigError {
            field: field.into(),
            reason: reason.into(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum TransferModel {
    Instantaneous,
    Bandwidth { bytes_per_sec: f64 },
}

impl TransferModel {
    pub fn duration(&self, bytes: u64) -> f64 {
        match self {
            TransferModel::Instantaneous => 0.0,
            TransferModel::Bandwidth { bytes_per_sec } => bytes as f64 / bytes_per_sec,
        }
    }
}

/// A fully materialized run description: who exists, what they want,
/// which messages appear when, and how the routing layer behaves.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub nodes: usize,
    /// Per node, indexed by node id.
    pub interests: Vec<BTreeSet<InterestId>>,
    pub protocol: Protocol,
    /// Every message with its creation time and TTL. Ids must be unique.
    pub messages: Vec<Message>,
    pub buffer: Capacity,
    pub buffer_overrides: BTreeMap<NodeId, Capacity>,
    pub transfer: TransferModel,
    /// Simulated seconds; events after this are not processed.
    pub duration: f64,
    pub clock: SampleClock,
    /// Attach a dump of every node's social state to the result.
    pub capture_state: bool,
}

impl Scenario {
    pub fn new(nodes: usize, protocol: Protocol, duration: f64) -> Scenario {
        Scenario {
            nodes,
            interests: vec![BTreeSet::new(); nodes],
            protocol,
            messages: Vec::new(),
            buffer: Capacity::Limited(2_000_000),
            buffer_overrides: BTreeMap::new(),
            transfer: TransferModel::Instantaneous,
            duration,
            clock: SampleClock::hourly(),
            capture_state: false,
        }
    }

    pub fn capacity_of(&self, node: NodeId) -> Capacity {
        self.buffer_overrides.get(&node).copied().unwrap_or(self.buffer)
    }

    /// Is `node` one of the parties `msg` should reach?
    pub fn is_recipient(&self, node: NodeId, msg: &Message) -> bool {
        match msg.addressing {
            Addressing::Destination(d) => d == node,
            Addressing::ContentType(x) => {
                node != msg.source
                    && self
                        .interests
                        .get(node.0 as usize)
                        .is_some_and(|set| set.contains(&x))
            }
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.nodes < 2 {
            return Err(ConfigError::new("nodes", "need at least two nodes"));
        }
        if self.interests.len() != self.nodes {
            return Err(ConfigError::new(
                "interests",
                format!("{} interest sets for {} nodes", self.interests.len(), self.nodes),
            ));
        }
        if !(self.duration > 0.0) || !self.duration.is_finite() {
            return Err(ConfigError::new("duration", "must be positive and finite"));
        }
        for node in self.buffer_overrides.keys() {
            if node.0 as usize >= self.nodes {
                return Err(ConfigError::new("buffer.overrides", format!("unknown node {node}")));
            }
        }
        if let TransferModel::Bandwidth { bytes_per_sec } = self.transfer {
            if !(bytes_per_sec > 0.0) {
                return Err(ConfigError::new("transfer.bytes_per_sec", "must be positive"));
            }
        }
        match self.protocol {
            Protocol::SprayAndWait { copies: 0 } => {
                return Err(ConfigError::new("spray_and_wait.copies", "must be at least 1"));
            }
            Protocol::BubbleRap { community, window } => {
                if community.k < 2 {
                    return Err(ConfigError::new("bubble_rap.k", "must be at least 2"));
                }
                let ratio = window / self.clock.sample_duration();
                if !(window > 0.0) || ratio.fract() != 0.0 {
                    return Err(ConfigError::new(
                        "bubble_rap.window_s",
                        "must be a positive multiple of the sample duration",
                    ));
                }
            }
            Protocol::Dlife(p) if !(0.0..=1.0).contains(&p.alpha) => {
                return Err(ConfigError::new("dlife.alpha", "must lie in [0, 1]"));
            }
            _ => {}
        }
        let receiver_driven = self.protocol.kind().is_receiver_driven();
        let mut seen = BTreeSet::<MessageId>::new();
        for (idx, m) in self.messages.iter().enumerate() {
            let field = |f: &str| format!("messages[{idx}].{f}");
            if !seen.insert(m.id) {
                return Err(ConfigError::new(field("id"), format!("duplicate id {}", m.id)));
            }
            if m.source.0 as usize >= self.nodes {
                return Err(ConfigError::new(field("source"), format!("unknown node {}", m.source)));
            }
            if m.size == 0 {
                return Err(ConfigError::new(field("size"), "must be > 0"));
            }
            if !(m.ttl > 0.0) {
                return Err(ConfigError::new(field("ttl"), "must be > 0"));
            }
            if m.created_at.secs() >= self.duration {
                return Err(ConfigError::new(field("created_at"), "after the end of the run"));
            }
            match m.addressing {
                Addressing::Destination(d) => {
                    if receiver_driven {
                        return Err(ConfigError::new(
                            field("addressing"),
                            format!("{} needs content-addressed traffic", self.protocol.kind()),
                        ));
                    }
                    if d.0 as usize >= self.nodes || d == m.source {
                        return Err(ConfigError::new(field("destination"), format!("invalid destination {d}")));
                    }
                }
                Addressing::ContentType(_) => {
                    if !receiver_driven {
                        return Err(ConfigError::new(
                            field("addressing"),
                            format!("{} needs destination-addressed traffic", self.protocol.kind()),
                        ));
                    }
                }
            }
        }
        Ok(())
    }

    /// Parameters echoed into results; two runs with the same description
    /// belong to the same sweep point.
    pub fn describe(&self) -> BTreeMap<String, String> {
        let mut out: BTreeMap<String, String> = self.protocol.describe().into_iter().collect();
        out.insert("nodes".into(), self.nodes.to_string());
        out.insert("messages".into(), self.messages.len().to_string());
        out.insert("expected_deliveries".into(), expected_deliveries(self).to_string());
        out.insert("buffer_bytes".into(), self.buffer.to_string());
        for (node, cap) in &self.buffer_overrides {
            out.insert(format!("buffer_bytes.node{node}"), cap.to_string());
        }
        out.insert("buffer_eviction".into(), "fifo_by_reception".into());
        out.insert("duration_s".into(), self.duration.to_string());
        out.insert("samples_per_day".into(), self.clock.samples_per_day().to_string());
        out.insert("sample_duration_s".into(), self.clock.sample_duration().to_string());
        out.insert(
            "transfer".into(),
            match self.transfer {
                TransferModel::Instantaneous => "instantaneous".into(),
                TransferModel::Bandwidth { bytes_per_sec } => format!("bandwidth {bytes_per_sec} B/s"),
            },
        );
        out
    }
}

/// Number of (message, recipient) pairs that a perfect protocol would
/// deliver.
pub fn expected_deliveries(scenario: &Scenario) -> u64 {
    scenario
        .messages
        .iter()
        .map(|m| match m.addressing {
            Addressing::Destination(_) => 1,
            Addressing::ContentType(_) => (0..scenario.nodes)
                .filter(|&n| scenario.is_recipient(NodeId(n as u32), m))
                .count() as u64,
        })
        .sum()
}
