//! Domain values shared by the whole simulator: time, identifiers,
//! messages, contacts and per-node buffers.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const SECONDS_PER_DAY: f64 = 86_400.0;

/// Seconds since the simulation epoch. Never negative, never NaN.
#[derive(Debug, Clone, Copy, Default, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct SimTime(f64);

impl SimTime {
    pub const ZERO: SimTime = SimTime(0.0);

    pub fn new(secs: f64) -> Option<SimTime> {
        if secs.is_finite() && secs >= 0.0 {
            // folds -0.0 into +0.0 so equality and ordering agree
            Some(SimTime(secs + 0.0))
        } else {
            None
        }
    }

    /// Panics on negative or non-finite input.
    pub fn from_secs(secs: f64) -> SimTime {
        SimTime::new(secs).unwrap_or_else(|| panic!("invalid simulation time {secs}"))
    }

    pub fn secs(self) -> f64 {
        self.0
    }

    pub fn after(self, seconds: f64) -> SimTime {
        SimTime::from_secs(self.0 + seconds)
    }

    pub fn since(self, earlier: SimTime) -> f64 {
        self.0 - earlier.0
    }
}

impl PartialEq for SimTime {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for SimTime {}

impl PartialOrd for SimTime {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for SimTime {
    fn cmp(&self, other: &Self) -> Ordering {
        self.0.total_cmp(&other.0)
    }
}

impl TryFrom<f64> for SimTime {
    type Error = String;

    fn try_from(secs: f64) -> Result<Self, Self::Error> {
        SimTime::new(secs).ok_or_else(|| format!("invalid simulation time {secs}"))
    }
}

impl From<SimTime> for f64 {
    fn from(t: SimTime) -> f64 {
        t.0
    }
}

impl fmt::Display for SimTime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}s", self.0)
    }
}

macro_rules! id_type {
    ($(#[$meta:meta])* $name:ident, $inner:ty) => {
        $(#[$meta])*
        #[derive(
            Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize,
        )]
        #[serde(transparent)]
        pub struct $name(pub $inner);

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                write!(f, "{}", self.0)
            }
        }

        impl From<$name> for $inner {
            fn from(id: $name) -> $inner {
                id.0
            }
        }
    };
}

id_type!(
    /// A device taking part in the opportunistic network.
    NodeId,
    u32
);
id_type!(
    /// One content type, which is also what a node declares interest in.
    InterestId,
    u32
);
id_type!(MessageId, u64);

/// How a message finds its recipients.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Addressing {
    /// Source-driven: one named destination.
    Destination(NodeId),
    /// Receiver-driven: every node interested in this content type.
    ContentType(InterestId),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Message {
    pub id: MessageId,
    pub source: NodeId,
    pub addressing: Addressing,
    /// Bytes, always > 0.
    pub size: u64,
    pub created_at: SimTime,
    /// Lifetime in seconds, always > 0.
    pub ttl: f64,
}

impl Message {
    pub fn expires_at(&self) -> SimTime {
        self.created_at.after(self.ttl)
    }

    /// Live on `[created_at, created_at + ttl)`.
    pub fn is_live(&self, now: SimTime) -> bool {
        now < self.expires_at()
    }

    pub fn destination(&self) -> Option<NodeId> {
        match self.addressing {
            Addressing::Destination(d) => Some(d),
            Addressing::ContentType(_) => None,
        }
    }

    pub fn content_type(&self) -> Option<InterestId> {
        match self.addressing {
            Addressing::ContentType(x) => Some(x),
            Addressing::Destination(_) => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ContactError {
    #[error("self-contact on node {0}")]
    SelfContact(NodeId),
    #[error("contact must start before it ends ({start} >= {end})")]
    EmptyInterval { start: SimTime, end: SimTime },
}

/// An undirected interval during which two nodes can exchange data.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Contact {
    a: NodeId,
    b: NodeId,
    start: SimTime,
    end: SimTime,
}

impl Contact {
    /// Canonicalizes the endpoints so that `a < b`.
    pub fn new(a: NodeId, b: NodeId, start: SimTime, end: SimTime) -> Result<Contact, ContactError> {
        if a == b {
            return Err(ContactError::SelfContact(a));
        }
        if start >= end {
            return Err(ContactError::EmptyInterval { start, end });
        }
        let (a, b) = if a < b { (a, b) } else { (b, a) };
        Ok(Contact { a, b, start, end })
    }

    pub fn a(&self) -> NodeId {
        self.a
    }

    pub fn b(&self) -> NodeId {
        self.b
    }

    pub fn start(&self) -> SimTime {
        self.start
    }

    pub fn end(&self) -> SimTime {
        self.end
    }

    pub fn duration(&self) -> f64 {
        self.end.since(self.start)
    }

    pub fn involves(&self, node: NodeId) -> bool {
        self.a == node || self.b == node
    }

    pub fn peer_of(&self, node: NodeId) -> Option<NodeId> {
        if node == self.a {
            Some(self.b)
        } else if node == self.b {
            Some(self.a)
        } else {
            None
        }
    }

    pub fn covers(&self, t: SimTime) -> bool {
        self.start <= t && t <= self.end
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Capacity {
    Limited(u64),
    Unlimited,
}

impl Capacity {
    pub fn fits(self, bytes: u64) -> bool {
        match self {
            Capacity::Limited(cap) => bytes <= cap,
            Capacity::Unlimited => true,
        }
    }
}

impl fmt::Display for Capacity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Capacity::Limited(cap) => write!(f, "{cap}"),
            Capacity::Unlimited => f.write_str("unlimited"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BufferEntry {
    pub message: Message,
    pub received_at: SimTime,
    /// Spray-and-Wait copy budget carried with this replica; 1 elsewhere.
    pub copies: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum BufferError {
    #[error("message {0} is already buffered")]
    DuplicateId(MessageId),
    #[error("message {0} is not live at insertion time")]
    NotLive(MessageId),
}

#[derive(Debug, Clone, PartialEq)]
pub enum InsertOutcome {
    Stored {
        evicted: Vec<BufferEntry>,
        expired: Vec<BufferEntry>,
    },
    /// The message is larger than the whole buffer; nothing was evicted.
    NoFit { expired: Vec<BufferEntry> },
}

/// Per-node message store, FIFO by reception time.
#[derive(Debug, Clone, PartialEq)]
pub struct Buffer {
    capacity: Capacity,
    /// Keyed by arrival sequence number, so iteration is reception order.
    entries: BTreeMap<u64, BufferEntry>,
    index: BTreeMap<MessageId, u64>,
    ids: BTreeSet<MessageId>,
    next_seq: u64,
    occupancy: u64,
}

impl Buffer {
    pub fn new(capacity: Capacity) -> Buffer {
        Buffer {
            capacity,
            entries: BTreeMap::new(),
            index: BTreeMap::new(),
            ids: BTreeSet::new(),
            next_seq: 0,
            occupancy: 0,
        }
    }

    pub fn capacity(&self) -> Capacity {
        self.capacity
    }

    pub fn occupancy(&self) -> u64 {
        self.occupancy
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn contains(&self, id: MessageId) -> bool {
        self.ids.contains(&id)
    }

    pub fn ids(&self) -> &BTreeSet<MessageId> {
        &self.ids
    }

    /// Entries in reception order.
    pub fn iter(&self) -> impl Iterator<Item = &BufferEntry> {
        self.entries.values()
    }

    pub fn get(&self, id: MessageId) -> Option<&BufferEntry> {
        self.entries.get(self.index.get(&id)?)
    }

    pub fn get_mut(&mut self, id: MessageId) -> Option<&mut BufferEntry> {
        self.entries.get_mut(self.index.get(&id)?)
    }

    pub fn remove(&mut self, id: MessageId) -> Option<BufferEntry> {
        let seq = self.index.remove(&id)?;
        self.ids.remove(&id);
        let entry = self.entries.remove(&seq).expect("index and entries agree");
        self.occupancy -= entry.message.size;
        Some(entry)
    }

    /// Drops every entry that is no longer live at `now` and returns them.
    pub fn purge_expired(&mut self, now: SimTime) -> Vec<BufferEntry> {
        let dead: Vec<MessageId> = self
            .entries
            .values()
            .filter(|e| !e.message.is_live(now))
            .map(|e| e.message.id)
            .collect();
        dead.into_iter()
            .map(|id| self.remove(id).expect("listed above"))
            .collect()
    }

    /// Stores `msg`, evicting the oldest-received entries until it fits.
    pub fn insert(
        &mut self,
        msg: Message,
        copies: u32,
        now: SimTime,
    ) -> Result<InsertOutcome, BufferError> {
        if !msg.is_live(now) {
            return Err(BufferError::NotLive(msg.id));
        }
        let expired = self.purge_expired(now);
        if self.ids.contains(&msg.id) {
            return Err(BufferError::DuplicateId(msg.id));
        }
        if !self.capacity.fits(msg.size) {
            return Ok(InsertOutcome::NoFit { expired });
        }
        debug_assert!(self.entries.values().next_back().is_none_or(|e| e.received_at <= now));
        let mut evicted = Vec::new();
        while !self.capacity.fits(self.occupancy + msg.size) {
            let (_, oldest) = self.entries.pop_first().expect("occupancy > 0 implies an entry");
            self.index.remove(&oldest.message.id);
            self.ids.remove(&oldest.message.id);
            self.occupancy -= oldest.message.size;
            evicted.push(oldest);
        }
        let seq = self.next_seq;
        self.next_seq += 1;
        self.occupancy += msg.size;
        self.ids.insert(msg.id);
        self.index.insert(msg.id, seq);
        self.entries.insert(
            seq,
            BufferEntry {
                message: msg,
                received_at: now,
                copies,
            },
        );
        Ok(InsertOutcome::Stored { evicted, expired })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DeliveryRecord {
    pub message: MessageId,
    pub recipient: NodeId,
    pub delivered_at: SimTime,
    pub created_at: SimTime,
}

impl DeliveryRecord {
    pub fn latency(&self) -> f64 {
        self.delivered_at.since(self.created_at)
    }
}

/// A (day, sample) cell. Days count from 1.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct SampleSlot {
    pub day: u32,
    pub sample: usize,
}

#[derive(Debug, Clone, PartialEq, Error)]
#[error("{samples_per_day} samples of {sample_duration}s do not tile a day")]
pub struct ClockError {
    pub samples_per_day: usize,
    pub sample_duration: f64,
}

/// Splits the day into equal daily samples.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SampleClock {
    samples_per_day: usize,
    sample_duration: f64,
}

impl SampleClock {
    pub fn new(samples_per_day: usize, sample_duration: f64) -> Result<SampleClock, ClockError> {
        let err = ClockError {
            samples_per_day,
            sample_duration,
        };
        if samples_per_day == 0 || !(sample_duration > 0.0) {
            return Err(err);
        }
        if samples_per_day as f64 * sample_duration != SECONDS_PER_DAY {
            return Err(err);
        }
        Ok(SampleClock {
            samples_per_day,
            sample_duration,
        })
    }

    pub fn per_day(samples_per_day: usize) -> Result<SampleClock, ClockError> {
        SampleClock::new(samples_per_day, SECONDS_PER_DAY / samples_per_day.max(1) as f64)
    }

    /// 24 one-hour samples.
    pub fn hourly() -> SampleClock {
        SampleClock {
            samples_per_day: 24,
            sample_duration: 3600.0,
        }
    }

    pub fn samples_per_day(&self) -> usize {
        self.samples_per_day
    }

    pub fn sample_duration(&self) -> f64 {
        self.sample_duration
    }

    pub fn locate(&self, t: SimTime) -> SampleSlot {
        let secs = t.secs();
        let day_index = (secs / SECONDS_PER_DAY).floor();
        let within = secs - day_index * SECONDS_PER_DAY;
        let sample = ((within / self.sample_duration).floor() as usize).min(self.samples_per_day - 1);
        SampleSlot {
            day: day_index as u32 + 1,
            sample,
        }
    }

    pub fn slot_start(&self, slot: SampleSlot) -> SimTime {
        SimTime::from_secs(
            f64::from(slot.day - 1) * SECONDS_PER_DAY + slot.sample as f64 * self.sample_duration,
        )
    }

    /// Start of the `k`-th sample since the epoch (0-based).
    pub fn boundary(&self, k: u64) -> SimTime {
        let spd = self.samples_per_day as u64;
        self.slot_start(SampleSlot {
            day: (k / spd) as u32 + 1,
            sample: (k % spd) as usize,
        })
    }

    /// The slot that ends at the `k`-th boundary (`k >= 1`).
    pub fn slot_ending_at(&self, k: u64) -> SampleSlot {
        let prev = k - 1;
        let spd = self.samples_per_day as u64;
        SampleSlot {
            day: (prev / spd) as u32 + 1,
            sample: (prev % spd) as usize,
        }
    }
}

/// `(day, sample)` for `t`; days are 1-based.
pub fn sample_index(t: SimTime, samples_per_day: usize, sample_duration: f64) -> Result<(u32, usize), ClockError> {
    let slot = SampleClock::new(samples_per_day, sample_duration)?.locate(t);
    Ok((slot.day, slot.sample))
}
