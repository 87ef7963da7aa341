//! Forwarding decisions for SCORP, dLife, Bubble Rap and binary Spray and
//! Wait.
//!
//! Every decision is a pure function of the carrier's buffer and social
//! view and of the encountered peer's summary. The engine snapshots social
//! views when a contact comes up and reads the peer's carried and consumed
//! sets live, so a message is never offered to a node already holding it.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::model::{Addressing, Buffer, BufferEntry, InterestId, MessageId, NodeId, SimTime};
use crate::social::{CommunityParams, ImportanceParams, DEFAULT_WINDOW};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProtocolKind {
    Scorp,
    Dlife,
    BubbleRap,
    SprayAndWait,
}

impl ProtocolKind {
    pub const ALL: [ProtocolKind; 4] = [
        ProtocolKind::Scorp,
        ProtocolKind::Dlife,
        ProtocolKind::BubbleRap,
        ProtocolKind::SprayAndWait,
    ];

    /// SCORP pulls content by interest; the others push to a destination.
    pub fn is_receiver_driven(self) -> bool {
        self == ProtocolKind::Scorp
    }

    pub fn name(self) -> &'static str {
        match self {
            ProtocolKind::Scorp => "scorp",
            ProtocolKind::Dlife => "dlife",
            ProtocolKind::BubbleRap => "bubble_rap",
            ProtocolKind::SprayAndWait => "spray_and_wait",
        }
    }
}

impl fmt::Display for ProtocolKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// A protocol together with its parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Protocol {
    Scorp,
    Dlife(ImportanceParams),
    BubbleRap {
        community: CommunityParams,
        window: f64,
    },
    SprayAndWait {
        copies: u32,
    },
}

impl Protocol {
    pub fn kind(&self) -> ProtocolKind {
        match self {
            Protocol::Scorp => ProtocolKind::Scorp,
            Protocol::Dlife(_) => ProtocolKind::Dlife,
            Protocol::BubbleRap { .. } => ProtocolKind::BubbleRap,
            Protocol::SprayAndWait { .. } => ProtocolKind::SprayAndWait,
        }
    }

    pub fn with_defaults(kind: ProtocolKind) -> Protocol {
        match kind {
            ProtocolKind::Scorp => Protocol::Scorp,
            ProtocolKind::Dlife => Protocol::Dlife(ImportanceParams::default()),
            ProtocolKind::BubbleRap => Protocol::BubbleRap {
                community: CommunityParams::default(),
                window: DEFAULT_WINDOW,
            },
            ProtocolKind::SprayAndWait => Protocol::SprayAndWait { copies: 10 },
        }
    }

    /// Copy budget a freshly created message starts with.
    pub fn initial_copies(&self) -> u32 {
        match self {
            Protocol::SprayAndWait { copies } => *copies,
            _ => 1,
        }
    }

    /// Parameters as `key=value` pairs for result metadata.
    pub fn describe(&self) -> Vec<(String, String)> {
        let mut out = vec![("protocol".to_string(), self.kind().to_string())];
        match self {
            Protocol::Scorp => {}
            Protocol::Dlife(p) => {
                out.push(("dlife.alpha".into(), p.alpha.to_string()));
                out.push(("dlife.initial_importance".into(), p.initial.to_string()));
                out.push(("dlife.importance_formula".into(), "stand-in damped neighbour sum".into()));
            }
            Protocol::BubbleRap { community, window } => {
                out.push(("bubble_rap.k".into(), community.k.to_string()));
                out.push((
                    "bubble_rap.familiar_threshold_s".into(),
                    community.familiar_threshold.to_string(),
                ));
                out.push(("bubble_rap.window_s".into(), window.to_string()));
            }
            Protocol::SprayAndWait { copies } => {
                out.push(("spray_and_wait.copies".into(), copies.to_string()));
                out.push(("spray_and_wait.mode".into(), "binary, peer gets floor(c/2)".into()));
            }
        }
        out
    }
}

/// What a node tells an encountered peer about itself.
#[derive(Debug, Clone, PartialEq)]
pub enum SocialView {
    Scorp {
        interests: BTreeSet<InterestId>,
        weights: BTreeMap<InterestId, f64>,
    },
    Dlife {
        weights: BTreeMap<NodeId, f64>,
        importance: f64,
    },
    BubbleRap {
        community: BTreeSet<NodeId>,
        global: f64,
        local: f64,
    },
    SprayAndWait,
}

fn weight_of<K: Ord>(weights: &BTreeMap<K, f64>, key: &K) -> f64 {
    weights.get(key).copied().unwrap_or(0.0)
}

/// The peer's side of an encounter, as seen by the carrier.
#[derive(Debug, Clone, Copy)]
pub struct EncounterSummary<'a> {
    pub peer: NodeId,
    pub view: &'a SocialView,
    pub carried: &'a BTreeSet<MessageId>,
    pub consumed: &'a BTreeSet<MessageId>,
}

/// The carrier's own side.
#[derive(Debug, Clone, Copy)]
pub struct Carrier<'a> {
    pub node: NodeId,
    pub view: &'a SocialView,
    pub buffer: &'a Buffer,
    pub now: SimTime,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ForwardKind {
    /// The peer stores a copy; the carrier keeps its own.
    Replicate,
    /// Spray and Wait: hand `n` of the carrier's copies to the peer.
    TransferCopies(u32),
    /// The peer is a recipient. For content-addressed messages it also
    /// keeps a copy for further spreading.
    Deliver,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ForwardAction {
    pub message: MessageId,
    pub kind: ForwardKind,
}

/// Decision for a single buffered message. `None` for expired messages,
/// messages the peer already carries, or no forwarding opportunity.
pub fn decide(carrier: &Carrier<'_>, peer: &EncounterSummary<'_>, entry: &BufferEntry) -> Option<ForwardKind> {
    let msg = &entry.message;
    if !msg.is_live(carrier.now) || peer.carried.contains(&msg.id) || peer.peer == carrier.node {
        return None;
    }
    // a destination that already consumed a message never gets it again
    if msg.destination().is_some() && peer.consumed.contains(&msg.id) {
        return None;
    }
    match (carrier.view, peer.view) {
        (
            SocialView::Scorp { weights: own, .. },
            SocialView::Scorp {
                interests,
                weights: theirs,
            },
        ) => {
            let Addressing::ContentType(x) = msg.addressing else {
                return None;
            };
            if interests.contains(&x) {
                Some(ForwardKind::Deliver)
            } else if weight_of(theirs, &x) > weight_of(own, &x) {
                Some(ForwardKind::Replicate)
            } else {
                None
            }
        }
        (
            SocialView::Dlife {
                weights: own,
                importance: own_imp,
            },
            SocialView::Dlife {
                weights: theirs,
                importance: their_imp,
            },
        ) => {
            let d = msg.destination()?;
            if peer.peer == d {
                return Some(ForwardKind::Deliver);
            }
            let (mine, other) = (weight_of(own, &d), weight_of(theirs, &d));
            if other > mine || (mine == 0.0 && other == 0.0 && their_imp > own_imp) {
                Some(ForwardKind::Replicate)
            } else {
                None
            }
        }
        (
            SocialView::BubbleRap {
                community: own,
                local: own_local,
                global: own_global,
            },
            SocialView::BubbleRap {
                community: theirs,
                local: their_local,
                global: their_global,
            },
        ) => {
            let d = msg.destination()?;
            if peer.peer == d {
                return Some(ForwardKind::Deliver);
            }
            let forward = if own.contains(&d) {
                theirs.contains(&d) && their_local > own_local
            } else {
                theirs.contains(&d) || their_global > own_global
            };
            forward.then_some(ForwardKind::Replicate)
        }
        (SocialView::SprayAndWait, SocialView::SprayAndWait) => {
            let d = msg.destination()?;
            if peer.peer == d {
                Some(ForwardKind::Deliver)
            } else if entry.copies > 1 {
                Some(ForwardKind::TransferCopies(entry.copies / 2))
            } else {
                None
            }
        }
        _ => None,
    }
}

/// Actions for every live buffered message the peer lacks, in ascending
/// message id.
pub fn on_encounter(carrier: &Carrier<'_>, peer: &EncounterSummary<'_>) -> Vec<ForwardAction> {
    let mut entries: Vec<&BufferEntry> = carrier.buffer.iter().collect();
    entries.sort_by_key(|e| e.message.id);
    entries
        .into_iter()
        .filter_map(|e| {
            decide(carrier, peer, e).map(|kind| ForwardAction {
                message: e.message.id,
                kind,
            })
        })
        .collect()
}

pub fn scorp_on_encounter(carrier: &Carrier<'_>, peer: &EncounterSummary<'_>) -> Vec<ForwardAction> {
    debug_assert!(matches!(peer.view, SocialView::Scorp { .. }));
    on_encounter(carrier, peer)
}

pub fn dlife_on_encounter(carrier: &Carrier<'_>, peer: &EncounterSummary<'_>) -> Vec<ForwardAction> {
    debug_assert!(matches!(peer.view, SocialView::Dlife { .. }));
    on_encounter(carrier, peer)
}

pub fn bubble_on_encounter(carrier: &Carrier<'_>, peer: &EncounterSummary<'_>) -> Vec<ForwardAction> {
    debug_assert!(matches!(peer.view, SocialView::BubbleRap { .. }));
    on_encounter(carrier, peer)
}

pub fn snw_on_encounter(carrier: &Carrier<'_>, peer: &EncounterSummary<'_>) -> Vec<ForwardAction> {
    debug_assert!(matches!(peer.view, SocialView::SprayAndWait));
    on_encounter(carrier, peer)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Capacity, Message};

    const NOW: f64 = 100.0;

    fn buffer_with(msgs: &[(u64, Addressing, u32)]) -> Buffer {
        let mut buf = Buffer::new(Capacity::Unlimited);
        for &(id, addressing, copies) in msgs {
            let m = Message {
                id: MessageId(id),
                source: NodeId(0),
                addressing,
                size: 1000,
                created_at: SimTime::ZERO,
                ttl: 86_400.0,
            };
            buf.insert(m, copies, SimTime::ZERO).unwrap();
        }
        buf
    }

    fn run(
        own: &SocialView,
        theirs: &SocialView,
        buf: &Buffer,
        peer: u32,
        carried: &[u64],
    ) -> Vec<ForwardAction> {
        let carried: BTreeSet<MessageId> = carried.iter().map(|&i| MessageId(i)).collect();
        let consumed = BTreeSet::new();
        let carrier = Carrier {
            node: NodeId(0),
            view: own,
            buffer: buf,
            now: SimTime::from_secs(NOW),
        };
        let summary = EncounterSummary {
            peer: NodeId(peer),
            view: theirs,
            carried: &carried,
            consumed: &consumed,
        };
        on_encounter(&carrier, &summary)
    }

    fn scorp(interests: &[u32], weights: &[(u32, f64)]) -> SocialView {
        SocialView::Scorp {
            interests: interests.iter().map(|&x| InterestId(x)).collect(),
            weights: weights.iter().map(|&(x, w)| (InterestId(x), w)).collect(),
        }
    }

    const TYPE1: Addressing = Addressing::ContentType(InterestId(1));

    #[test]
    fn scorp_interested_peer_gets_delivery() {
        let buf = buffer_with(&[(1, TYPE1, 1)]);
        let acts = run(&scorp(&[], &[]), &scorp(&[1], &[]), &buf, 1, &[]);
        assert_eq!(
            acts,
            vec![ForwardAction {
                message: MessageId(1),
                kind: ForwardKind::Deliver
            }]
        );
    }

    #[test]
    fn scorp_equal_weight_is_not_enough() {
        let buf = buffer_with(&[(1, TYPE1, 1)]);
        assert!(run(&scorp(&[], &[(1, 5.0)]), &scorp(&[], &[(1, 5.0)]), &buf, 1, &[]).is_empty());
        let acts = run(&scorp(&[], &[(1, 5.0)]), &scorp(&[], &[(1, 5.5)]), &buf, 1, &[]);
        assert_eq!(acts[0].kind, ForwardKind::Replicate);
    }

    #[test]
    fn scorp_skips_messages_the_peer_carries() {
        let buf = buffer_with(&[(1, TYPE1, 1), (2, TYPE1, 1)]);
        let acts = run(&scorp(&[], &[]), &scorp(&[1], &[(1, 99.0)]), &buf, 1, &[1]);
        assert_eq!(acts.len(), 1);
        assert_eq!(acts[0].message, MessageId(2));
    }

    #[test]
    fn scorp_ignores_destination_traffic() {
        let buf = buffer_with(&[(1, Addressing::Destination(NodeId(1)), 1)]);
        assert!(run(&scorp(&[], &[]), &scorp(&[1], &[]), &buf, 1, &[]).is_empty());
    }

    fn dlife(weights: &[(u32, f64)], importance: f64) -> SocialView {
        SocialView::Dlife {
            weights: weights.iter().map(|&(n, w)| (NodeId(n), w)).collect(),
            importance,
        }
    }

    const TO9: Addressing = Addressing::Destination(NodeId(9));

    #[test]
    fn dlife_examples() {
        let buf = buffer_with(&[(1, TO9, 1)]);
        let acts = run(&dlife(&[], 0.2), &dlife(&[], 0.2), &buf, 9, &[]);
        assert_eq!(acts[0].kind, ForwardKind::Deliver);

        let acts = run(&dlife(&[(9, 3.0)], 0.2), &dlife(&[(9, 10.0)], 0.2), &buf, 4, &[]);
        assert_eq!(acts[0].kind, ForwardKind::Replicate);

        assert!(run(&dlife(&[], 0.2), &dlife(&[], 0.2), &buf, 4, &[]).is_empty());
        let acts = run(&dlife(&[], 0.2), &dlife(&[], 0.3), &buf, 4, &[]);
        assert_eq!(acts[0].kind, ForwardKind::Replicate);
        // importance only breaks ties between two zero weights
        assert!(run(&dlife(&[(9, 1.0)], 0.2), &dlife(&[], 5.0), &buf, 4, &[]).is_empty());
    }

    #[test]
    fn destination_that_consumed_is_skipped() {
        let buf = buffer_with(&[(1, TO9, 1)]);
        let view = dlife(&[], 0.2);
        let carried = BTreeSet::new();
        let consumed = BTreeSet::from([MessageId(1)]);
        let carrier = Carrier {
            node: NodeId(0),
            view: &view,
            buffer: &buf,
            now: SimTime::from_secs(NOW),
        };
        let summary = EncounterSummary {
            peer: NodeId(9),
            view: &view,
            carried: &carried,
            consumed: &consumed,
        };
        assert!(on_encounter(&carrier, &summary).is_empty());
    }

    fn bubble(community: &[u32], global: f64, local: f64) -> SocialView {
        SocialView::BubbleRap {
            community: community.iter().map(|&n| NodeId(n)).collect(),
            global,
            local,
        }
    }

    #[test]
    fn bubble_examples() {
        let buf = buffer_with(&[(1, TO9, 1)]);
        let acts = run(&bubble(&[0], 0.0, 0.0), &bubble(&[], 0.0, 0.0), &buf, 9, &[]);
        assert_eq!(acts[0].kind, ForwardKind::Deliver);

        let acts = run(&bubble(&[0], 2.0, 0.0), &bubble(&[4], 4.0, 0.0), &buf, 4, &[]);
        assert_eq!(acts[0].kind, ForwardKind::Replicate);

        assert!(run(&bubble(&[0, 9], 9.0, 3.0), &bubble(&[4, 9], 9.0, 1.0), &buf, 4, &[]).is_empty());
        let acts = run(&bubble(&[0, 9], 1.0, 1.0), &bubble(&[4, 9], 0.0, 3.0), &buf, 4, &[]);
        assert_eq!(acts[0].kind, ForwardKind::Replicate);

        // entering the destination's community beats global centrality
        let acts = run(&bubble(&[0], 9.0, 0.0), &bubble(&[4, 9], 0.0, 0.0), &buf, 4, &[]);
        assert_eq!(acts[0].kind, ForwardKind::Replicate);
        // once inside, never hand back to an outsider
        assert!(run(&bubble(&[0, 9], 0.0, 0.0), &bubble(&[4], 50.0, 50.0), &buf, 4, &[]).is_empty());
    }

    #[test]
    fn spray_and_wait_examples() {
        let v = SocialView::SprayAndWait;
        let buf = buffer_with(&[(1, TO9, 10)]);
        let acts = run(&v, &v, &buf, 4, &[]);
        assert_eq!(acts[0].kind, ForwardKind::TransferCopies(5));

        let buf = buffer_with(&[(1, TO9, 3)]);
        assert_eq!(run(&v, &v, &buf, 4, &[])[0].kind, ForwardKind::TransferCopies(1));

        let buf = buffer_with(&[(1, TO9, 1)]);
        assert!(run(&v, &v, &buf, 4, &[]).is_empty());
        assert_eq!(run(&v, &v, &buf, 9, &[])[0].kind, ForwardKind::Deliver);
    }

    #[test]
    fn expired_messages_are_never_forwarded() {
        let v = SocialView::SprayAndWait;
        let buf = buffer_with(&[(1, TO9, 10)]);
        let carried = BTreeSet::new();
        let carrier = Carrier {
            node: NodeId(0),
            view: &v,
            buffer: &buf,
            now: SimTime::from_secs(86_400.0),
        };
        let summary = EncounterSummary {
            peer: NodeId(9),
            view: &v,
            carried: &carried,
            consumed: &carried,
        };
        assert!(on_encounter(&carrier, &summary).is_empty());
    }

    #[test]
    fn actions_come_in_ascending_id() {
        let buf = buffer_with(&[(5, TYPE1, 1), (2, TYPE1, 1), (9, TYPE1, 1)]);
        let acts = run(&scorp(&[], &[]), &scorp(&[1], &[]), &buf, 1, &[]);
        let ids: Vec<u64> = acts.iter().map(|a| a.message.0).collect();
        assert_eq!(ids, vec![2, 5, 9]);
    }
}
