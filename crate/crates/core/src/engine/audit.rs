//! Post-run consistency checks over a `RunResult` and its trace.

use std::collections::{BTreeMap, BTreeSet};

use thiserror::Error;

use super::{expected_deliveries, RunResult, Scenario};
use crate::model::{Contact, MessageId, NodeId, SimTime};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AuditError {
    #[error("transfer {index} of message {message} at {at} has no contact between {from} and {to}")]
    OutsideContact {
        index: usize,
        message: MessageId,
        from: NodeId,
        to: NodeId,
        at: SimTime,
    },
    #[error("transfer {index} happens before its predecessor")]
    OutOfOrder { index: usize },
    #[error("transfer {index} moves message {message} from {from}, which did not hold it")]
    NotHeld {
        index: usize,
        message: MessageId,
        from: NodeId,
    },
    #[error("message {message} reached {recipient} without a transfer chain")]
    Unreachable { message: MessageId, recipient: NodeId },
    #[error("message {message} delivered to {recipient} at {at}, after expiry")]
    Expired {
        message: MessageId,
        recipient: NodeId,
        at: SimTime,
    },
    #[error("message {message} delivered to {recipient} twice")]
    Duplicate { message: MessageId, recipient: NodeId },
    #[error("{delivered} deliveries exceed the {expected} expected")]
    TooMany { delivered: u64, expected: u64 },
    #[error("forwarding count {counted} differs from {recorded} recorded transfers")]
    Count { counted: u64, recorded: u64 },
}

/// Verifies that every hop happened during a real contact, in time order,
/// from a node that had received the message, and that deliveries are
/// unique, live and within the expected count.
pub fn audit(scenario: &Scenario, trace: &[Contact], result: &RunResult) -> Result<(), AuditError> {
    if result.forwardings != result.transfers.len() as u64 {
        return Err(AuditError::Count {
            counted: result.forwardings,
            recorded: result.transfers.len() as u64,
        });
    }
    let mut by_pair: BTreeMap<(NodeId, NodeId), Vec<&Contact>> = BTreeMap::new();
    for c in trace {
        by_pair.entry((c.a(), c.b())).or_default().push(c);
    }
    let messages: BTreeMap<MessageId, _> = scenario.messages.iter().map(|m| (m.id, m)).collect();
    // earliest time each node could have held each message
    let mut reached: BTreeMap<(MessageId, NodeId), SimTime> = BTreeMap::new();
    for m in &scenario.messages {
        reached.insert((m.id, m.source), m.created_at);
    }
    let mut last = SimTime::ZERO;
    for (index, t) in result.transfers.iter().enumerate() {
        if t.at < last {
            return Err(AuditError::OutOfOrder { index });
        }
        last = t.at;
        let pair = if t.from < t.to { (t.from, t.to) } else { (t.to, t.from) };
        let in_contact = by_pair
            .get(&pair)
            .is_some_and(|cs| cs.iter().any(|c| c.covers(t.at)));
        if !in_contact {
            return Err(AuditError::OutsideContact {
                index,
                message: t.message,
                from: t.from,
                to: t.to,
                at: t.at,
            });
        }
        if !reached.get(&(t.message, t.from)).is_some_and(|&r| r <= t.at) {
            return Err(AuditError::NotHeld {
                index,
                message: t.message,
                from: t.from,
            });
        }
        reached.entry((t.message, t.to)).or_insert(t.at);
    }
    let mut seen = BTreeSet::new();
    for d in &result.deliveries {
        if !seen.insert((d.message, d.recipient)) {
            return Err(AuditError::Duplicate {
                message: d.message,
                recipient: d.recipient,
            });
        }
        let live = messages.get(&d.message).is_some_and(|m| m.is_live(d.delivered_at));
        if !live {
            return Err(AuditError::Expired {
                message: d.message,
                recipient: d.recipient,
                at: d.delivered_at,
            });
        }
        let hop = result
            .transfers
            .iter()
            .any(|t| t.message == d.message && t.to == d.recipient && t.at == d.delivered_at);
        if !hop {
            return Err(AuditError::Unreachable {
                message: d.message,
                recipient: d.recipient,
            });
        }
    }
    let expected = expected_deliveries(scenario);
    if result.deliveries.len() as u64 > expected {
        return Err(AuditError::TooMany {
            delivered: result.deliveries.len() as u64,
            expected,
        });
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::super::{run, TransferRecord};
    use super::*;
    use crate::model::{Addressing, Message};
    use crate::protocols::{ForwardKind, Protocol, ProtocolKind};

    fn setup() -> (Scenario, Vec<Contact>, RunResult) {
        let mut s = Scenario::new(3, Protocol::with_defaults(ProtocolKind::SprayAndWait), 1000.0);
        s.messages = vec![Message {
            id: MessageId(0),
            source: NodeId(0),
            addressing: Addressing::Destination(NodeId(2)),
            size: 10,
            created_at: SimTime::ZERO,
            ttl: 500.0,
        }];
        let trace = vec![
            Contact::new(NodeId(0), NodeId(1), SimTime::from_secs(10.0), SimTime::from_secs(20.0)).unwrap(),
            Contact::new(NodeId(1), NodeId(2), SimTime::from_secs(30.0), SimTime::from_secs(40.0)).unwrap(),
        ];
        let r = run(&s, &trace, 0).unwrap();
        (s, trace, r)
    }

    #[test]
    fn clean_run_passes() {
        let (s, trace, r) = setup();
        audit(&s, &trace, &r).unwrap();
    }

    #[test]
    fn tampered_hop_time_is_caught() {
        let (s, trace, mut r) = setup();
        r.transfers[1].at = SimTime::from_secs(25.0);
        assert!(matches!(audit(&s, &trace, &r), Err(AuditError::OutsideContact { index: 1, .. })));
    }

    #[test]
    fn hop_from_non_holder_is_caught() {
        let (s, trace, mut r) = setup();
        r.transfers.insert(
            0,
            TransferRecord {
                message: MessageId(0),
                from: NodeId(1),
                to: NodeId(0),
                at: SimTime::from_secs(10.0),
                kind: ForwardKind::Replicate,
            },
        );
        r.forwardings += 1;
        assert!(matches!(audit(&s, &trace, &r), Err(AuditError::NotHeld { index: 0, .. })));
    }

    #[test]
    fn duplicate_delivery_is_caught() {
        let (s, trace, mut r) = setup();
        r.deliveries.push(r.deliveries[0]);
        assert!(matches!(audit(&s, &trace, &r), Err(AuditError::Duplicate { .. })));
    }
}
