use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::model::{MessageId, NodeId, SimTime};

/// Index into the run's contact list.
pub type LinkId = usize;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EventKind {
    ContactDown(LinkId),
    /// Start of the `k`-th sample since the epoch; closes sample `k - 1`.
    SampleBoundary(u64),
    /// Index into the scenario's message list.
    CreateMessage(usize),
    ContactUp(LinkId),
    TransferComplete {
        link: LinkId,
        message: MessageId,
        from: NodeId,
        to: NodeId,
    },
}

impl EventKind {
    /// Simultaneous events run in this order.
    fn rank(&self) -> u8 {
        match self {
            EventKind::ContactDown(_) => 0,
            EventKind::SampleBoundary(_) => 1,
            EventKind::CreateMessage(_) => 2,
            EventKind::ContactUp(_) => 3,
            EventKind::TransferComplete { .. } => 4,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Event {
    pub time: SimTime,
    pub kind: EventKind,
    /// Kind-specific ids, compared after time and rank.
    ids: (u64, u64, u64),
    seq: u64,
}

impl Ord for Event {
    fn cmp(&self, other: &Self) -> Ordering {
        self.time
            .cmp(&other.time)
            .then(self.kind.rank().cmp(&other.kind.rank()))
            .then(self.ids.cmp(&other.ids))
            .then(self.seq.cmp(&other.seq))
    }
}

impl PartialOrd for Event {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Min-queue of events in the fixed processing order.
#[derive(Debug, Default)]
pub struct EventQueue {
    heap: BinaryHeap<std::cmp::Reverse<Event>>,
    seq: u64,
}

impl EventQueue {
    pub fn new() -> Self {
        Self::default()
    }

    /// `ids` orders simultaneous events of the same kind, e.g. the
    /// endpoints of a contact or a message id.
    pub fn push(&mut self, time: SimTime, kind: EventKind, ids: (u64, u64, u64)) {
        self.seq += 1;
        self.heap.push(std::cmp::Reverse(Event {
            time,
            kind,
            ids,
            seq: self.seq,
        }));
    }

    pub fn peek_time(&self) -> Option<SimTime> {
        self.heap.peek().map(|e| e.0.time)
    }

    pub fn pop(&mut self) -> Option<Event> {
        self.heap.pop().map(|e| e.0)
    }

    pub fn len(&self) -> usize {
        self.heap.len()
    }

    pub fn is_empty(&self) -> bool {
        self.heap.is_empty()
    }
}
