//! Deterministic discrete-event replay of a contact trace.
//!
//! One run owns every node's buffer and social state and walks a single
//! event queue. Decisions during a contact use social views captured when
//! the contact came up. A message is re-offered over a live contact only
//! when it newly arrives at one of the two endpoints, and each contact
//! carries a given message at most once.

mod audit;
mod event;
mod scenario;

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use serde::Serialize;
use thiserror::Error;

pub use audit::{audit, AuditError};
pub use event::{Event, EventKind, EventQueue, LinkId};
pub use scenario::{expected_deliveries, ConfigError, Scenario, TransferModel};

use crate::model::{
    Addressing, Buffer, BufferError, Contact, DeliveryRecord, InsertOutcome, Message, MessageId, NodeId, SimTime,
};
use crate::protocols::{decide, Carrier, EncounterSummary, ForwardKind, Protocol, SocialView};
use crate::social::{
    dlife_importance, kclique_update, snapshot, CentralityState, CommunityState, ImportanceParams,
    InterestSocialState, PeerSocialState,
};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("contact {index}: {reason}")]
pub struct TraceError {
    pub index: usize,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EngineError {
    #[error("invalid scenario: {0}")]
    Config(#[from] ConfigError),
    #[error("invalid trace: {0}")]
    Trace(#[from] TraceError),
}

/// One successful hop.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct TransferRecord {
    pub message: MessageId,
    pub from: NodeId,
    pub to: NodeId,
    pub at: SimTime,
    pub kind: ForwardKind,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct Drops {
    /// Buffered copies that outlived their TTL.
    pub ttl: u64,
    /// Copies pushed out by FIFO eviction.
    pub eviction: u64,
    /// Arrivals larger than the receiving buffer.
    pub no_fit: u64,
    /// Transfers cut short by the end of a contact.
    pub aborted: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunResult {
    pub seed: u64,
    pub expected_deliveries: u64,
    pub messages_created: u64,
    pub deliveries: Vec<DeliveryRecord>,
    /// Successful transfers, deliveries included.
    pub forwardings: u64,
    pub transfers: Vec<TransferRecord>,
    pub drops: Drops,
    /// Highest byte occupancy seen per node.
    pub peak_occupancy: Vec<u64>,
    /// Highest number of copies of each message held across all buffers
    /// at once.
    pub peak_copies: BTreeMap<MessageId, u32>,
    /// Copies of each message held across all buffers when the run ends,
    /// before the final expiry purge.
    pub final_copies: BTreeMap<MessageId, u32>,
    /// Transfers whose receiver already held the message.
    pub transfers_to_holders: u64,
    pub config: BTreeMap<String, String>,
    /// Social state at the end of the run in the snapshot text format.
    pub final_state: Option<String>,
}

/// Checks node ranges, the run horizon and same-pair overlaps.
pub fn validate_trace(scenario: &Scenario, trace: &[Contact]) -> Result<(), TraceError> {
    type Spans = Vec<(SimTime, SimTime, usize)>;
    let mut by_pair: BTreeMap<(NodeId, NodeId), Spans> = BTreeMap::new();
    for (index, c) in trace.iter().enumerate() {
        let err = |reason: String| TraceError { index, reason };
        if c.b().0 as usize >= scenario.nodes {
            return Err(err(format!("node {} outside 0..{}", c.b(), scenario.nodes)));
        }
        if c.start().secs() < 0.0 || c.end().secs() > scenario.duration {
            return Err(err(format!(
                "[{}, {}] outside the run [0, {}]",
                c.start(),
                c.end(),
                scenario.duration
            )));
        }
        by_pair.entry((c.a(), c.b())).or_default().push((c.start(), c.end(), index));
    }
    for ((a, b), mut spans) in by_pair {
        spans.sort();
        for w in spans.windows(2) {
            if w[1].0 < w[0].1 {
                return Err(TraceError {
                    index: w[1].2,
                    reason: format!("overlaps contact {} of pair ({a}, {b})", w[0].2),
                });
            }
        }
    }
    Ok(())
}

pub fn run(scenario: &Scenario, trace: &[Contact], seed: u64) -> Result<RunResult, EngineError> {
    scenario.validate()?;
    validate_trace(scenario, trace)?;
    let mut sim = Sim::new(scenario, trace);
    sim.schedule();
    sim.process();
    Ok(sim.finish(seed))
}

enum Social {
    Scorp(Vec<InterestSocialState>),
    Dlife {
        params: ImportanceParams,
        peers: Vec<PeerSocialState>,
    },
    Bubble {
        communities: Vec<CommunityState>,
        centrality: Vec<CentralityState>,
        window_samples: u64,
    },
    Plain,
}

struct Link {
    contact: Contact,
    accrued_until: SimTime,
    /// Index 0 is endpoint `a`, index 1 endpoint `b`.
    views: [SocialView; 2],
    sent: BTreeSet<MessageId>,
    /// Candidates as (direction, message); direction 0 is a to b.
    queue: VecDeque<(usize, MessageId)>,
    in_flight: Option<(usize, MessageId)>,
}

fn endpoints(contact: &Contact, dir: usize) -> (NodeId, NodeId) {
    if dir == 0 {
        (contact.a(), contact.b())
    } else {
        (contact.b(), contact.a())
    }
}

struct Sim<'s> {
    scenario: &'s Scenario,
    trace: &'s [Contact],
    now: SimTime,
    queue: EventQueue,
    buffers: Vec<Buffer>,
    consumed: Vec<BTreeSet<MessageId>>,
    social: Social,
    links: BTreeMap<LinkId, Link>,
    node_links: Vec<BTreeSet<LinkId>>,
    dirty: VecDeque<LinkId>,
    dirty_set: BTreeSet<LinkId>,
    deliveries: Vec<DeliveryRecord>,
    transfers: Vec<TransferRecord>,
    forwardings: u64,
    drops: Drops,
    peak: Vec<u64>,
    peak_copies: BTreeMap<MessageId, u32>,
    final_copies: BTreeMap<MessageId, u32>,
    transfers_to_holders: u64,
    created: u64,
}

impl<'s> Sim<'s> {
    fn new(scenario: &'s Scenario, trace: &'s [Contact]) -> Self {
        let n = scenario.nodes;
        let spd = scenario.clock.samples_per_day();
        let nodes = (0..n as u32).map(NodeId);
        let social = match scenario.protocol {
            Protocol::Scorp => Social::Scorp(nodes.map(|id| InterestSocialState::new(id, spd)).collect()),
            Protocol::Dlife(params) => Social::Dlife {
                params,
                peers: nodes.map(|id| PeerSocialState::new(id, spd, params.initial)).collect(),
            },
            Protocol::BubbleRap { community, window } => Social::Bubble {
                communities: nodes.clone().map(|id| CommunityState::new(id, community)).collect(),
                centrality: nodes.map(|id| CentralityState::new(id, window)).collect(),
                window_samples: (window / scenario.clock.sample_duration()).round() as u64,
            },
            Protocol::SprayAndWait { .. } => Social::Plain,
        };
        Sim {
            scenario,
            trace,
            now: SimTime::ZERO,
            queue: EventQueue::new(),
            buffers: (0..n as u32).map(|i| Buffer::new(scenario.capacity_of(NodeId(i)))).collect(),
            consumed: vec![BTreeSet::new(); n],
            social,
            links: BTreeMap::new(),
            node_links: vec![BTreeSet::new(); n],
            dirty: VecDeque::new(),
            dirty_set: BTreeSet::new(),
            deliveries: Vec::new(),
            transfers: Vec::new(),
            forwardings: 0,
            drops: Drops::default(),
            peak: vec![0; n],
            peak_copies: BTreeMap::new(),
            final_copies: BTreeMap::new(),
            transfers_to_holders: 0,
            created: 0,
        }
    }

    fn schedule(&mut self) {
        for (l, c) in self.trace.iter().enumerate() {
            let ids = (u64::from(c.a().0), u64::from(c.b().0), l as u64);
            self.queue.push(c.start(), EventKind::ContactUp(l), ids);
            self.queue.push(c.end(), EventKind::ContactDown(l), ids);
        }
        for (i, m) in self.scenario.messages.iter().enumerate() {
            self.queue.push(m.created_at, EventKind::CreateMessage(i), (m.id.0, 0, 0));
        }
        let clock = self.scenario.clock;
        let mut k = 1;
        while clock.boundary(k).secs() <= self.scenario.duration {
            self.queue.push(clock.boundary(k), EventKind::SampleBoundary(k), (k, 0, 0));
            k += 1;
        }
    }

    fn process(&mut self) {
        let horizon = SimTime::from_secs(self.scenario.duration);
        while self.queue.peek_time().is_some_and(|t| t <= horizon) {
            let event = self.queue.pop().expect("peeked");
            debug_assert!(event.time >= self.now, "time went backwards");
            self.now = event.time;
            match event.kind {
                EventKind::ContactDown(l) => self.contact_down(l),
                EventKind::SampleBoundary(k) => self.sample_boundary(k),
                EventKind::CreateMessage(i) => self.create(i),
                EventKind::ContactUp(l) => self.contact_up(l),
                EventKind::TransferComplete { link, message, .. } => self.transfer_complete(link, message),
            }
            self.drain();
        }
        self.now = horizon;
        for buffer in &self.buffers {
            for id in buffer.ids() {
                *self.final_copies.entry(*id).or_insert(0) += buffer.get(*id).map_or(0, |e| e.copies);
            }
        }
        for node in 0..self.buffers.len() {
            self.purge(node);
        }
    }

    fn finish(self, seed: u64) -> RunResult {
        let final_state = self.scenario.capture_state.then(|| self.render_state());
        RunResult {
            seed,
            expected_deliveries: expected_deliveries(self.scenario),
            messages_created: self.created,
            deliveries: self.deliveries,
            forwardings: self.forwardings,
            transfers: self.transfers,
            drops: self.drops,
            peak_occupancy: self.peak,
            peak_copies: self.peak_copies,
            final_copies: self.final_copies,
            transfers_to_holders: self.transfers_to_holders,
            config: self.scenario.describe(),
            final_state,
        }
    }

    fn render_state(&self) -> String {
        let rows = match &self.social {
            Social::Scorp(states) => states.iter().flat_map(snapshot::interest_rows).collect(),
            Social::Dlife { peers, .. } => peers.iter().flat_map(snapshot::peer_rows).collect(),
            Social::Bubble {
                communities,
                centrality,
                ..
            } => communities
                .iter()
                .flat_map(snapshot::community_rows)
                .chain(centrality.iter().flat_map(snapshot::centrality_rows))
                .collect(),
            Social::Plain => Vec::new(),
        };
        snapshot::render(rows)
    }

    fn purge(&mut self, node: usize) {
        self.drops.ttl += self.buffers[node].purge_expired(self.now).len() as u64;
    }

    fn view_of(&self, node: NodeId) -> SocialView {
        let idx = node.0 as usize;
        let sample = self.scenario.clock.locate(self.now).sample;
        match &self.social {
            Social::Scorp(states) => SocialView::Scorp {
                interests: self.scenario.interests[idx].clone(),
                weights: states[idx].weights(sample),
            },
            Social::Dlife { peers, .. } => SocialView::Dlife {
                weights: peers[idx].weights.weights(sample),
                importance: peers[idx].importance,
            },
            Social::Bubble {
                communities,
                centrality,
                ..
            } => SocialView::BubbleRap {
                community: communities[idx].local_community().clone(),
                global: centrality[idx].global_centrality(),
                local: centrality[idx].local_centrality(),
            },
            Social::Plain => SocialView::SprayAndWait,
        }
    }

    fn contact_up(&mut self, l: LinkId) {
        let contact = self.trace[l];
        let (a, b) = (contact.a(), contact.b());
        self.purge(a.0 as usize);
        self.purge(b.0 as usize);
        if let Social::Bubble { centrality, .. } = &mut self.social {
            centrality[a.0 as usize].record_encounter(b);
            centrality[b.0 as usize].record_encounter(a);
        }
        let mut queue = VecDeque::new();
        for (dir, node) in [(0, a), (1, b)] {
            queue.extend(self.buffers[node.0 as usize].ids().iter().map(|&id| (dir, id)));
        }
        let link = Link {
            contact,
            accrued_until: self.now,
            views: [self.view_of(a), self.view_of(b)],
            sent: BTreeSet::new(),
            queue,
            in_flight: None,
        };
        self.links.insert(l, link);
        self.node_links[a.0 as usize].insert(l);
        self.node_links[b.0 as usize].insert(l);
        self.mark_dirty(l);
    }

    fn contact_down(&mut self, l: LinkId) {
        self.accrue(l);
        let Some(link) = self.links.remove(&l) else {
            return;
        };
        if link.in_flight.is_some() {
            self.drops.aborted += 1;
        }
        let c = link.contact;
        self.node_links[c.a().0 as usize].remove(&l);
        self.node_links[c.b().0 as usize].remove(&l);
        if let Social::Bubble { communities, .. } = &mut self.social {
            kclique_update(communities, &c);
        }
    }

    /// Credits contact time on `l` from its last accrual up to now. Callers
    /// guarantee the span lies inside one sample.
    fn accrue(&mut self, l: LinkId) {
        let Some(link) = self.links.get_mut(&l) else {
            return;
        };
        let secs = self.now.since(link.accrued_until);
        let sample = self.scenario.clock.locate(link.accrued_until).sample;
        link.accrued_until = self.now;
        let (a, b) = (link.contact.a(), link.contact.b());
        match &mut self.social {
            Social::Scorp(states) => {
                let interests = &self.scenario.interests;
                states[a.0 as usize].accrue(interests[b.0 as usize].iter().copied(), sample, secs);
                states[b.0 as usize].accrue(interests[a.0 as usize].iter().copied(), sample, secs);
            }
            Social::Dlife { peers, .. } => {
                peers[a.0 as usize].weights.accrue([b], sample, secs);
                peers[b.0 as usize].weights.accrue([a], sample, secs);
            }
            Social::Bubble { .. } | Social::Plain => {}
        }
    }

    fn sample_boundary(&mut self, k: u64) {
        let active: Vec<LinkId> = self.links.keys().copied().collect();
        for l in active {
            self.accrue(l);
        }
        let slot = self.scenario.clock.slot_ending_at(k);
        let sample = self.scenario.clock.locate(self.now).sample;
        match &mut self.social {
            Social::Scorp(states) => {
                for s in states {
                    s.close_slot(slot).expect("sample boundaries arrive in order");
                }
            }
            Social::Dlife { params, peers } => {
                for p in peers.iter_mut() {
                    p.weights.close_slot(slot).expect("sample boundaries arrive in order");
                }
                let met: Vec<Vec<(NodeId, f64)>> = peers
                    .iter()
                    .map(|p| {
                        let w = p.weights.weights(sample);
                        let total: f64 = w.values().sum();
                        w.into_iter().map(|(b, v)| (b, v / total)).collect()
                    })
                    .collect();
                let previous: Vec<f64> = peers.iter().map(|p| p.importance).collect();
                let next = dlife_importance(params.alpha, &met, &previous);
                for (p, v) in peers.iter_mut().zip(next) {
                    p.importance = v;
                }
            }
            Social::Bubble {
                communities,
                centrality,
                window_samples,
            } => {
                if k.is_multiple_of(*window_samples) {
                    for (c, comm) in centrality.iter_mut().zip(communities.iter()) {
                        c.cwindow_update(comm.local_community());
                    }
                }
            }
            Social::Plain => {}
        }
    }

    fn create(&mut self, i: usize) {
        let msg = self.scenario.messages[i].clone();
        let source = msg.source.0 as usize;
        self.created += 1;
        let copies = self.scenario.protocol.initial_copies();
        let id = msg.id;
        self.store(source, msg, copies);
        self.note_copies(id);
    }

    fn note_copies(&mut self, id: MessageId) {
        let total: u32 = self.buffers.iter().filter_map(|b| b.get(id)).map(|e| e.copies).sum();
        let peak = self.peak_copies.entry(id).or_insert(0);
        *peak = (*peak).max(total);
    }

    /// Puts a copy into `node`'s buffer and offers it on the node's other
    /// contacts. Returns false when it did not fit.
    fn store(&mut self, node: usize, msg: Message, copies: u32) -> bool {
        let id = msg.id;
        match self.buffers[node].insert(msg, copies, self.now) {
            Ok(InsertOutcome::Stored { evicted, expired }) => {
                self.drops.eviction += evicted.len() as u64;
                self.drops.ttl += expired.len() as u64;
                self.peak[node] = self.peak[node].max(self.buffers[node].occupancy());
                let links: Vec<LinkId> = self.node_links[node].iter().copied().collect();
                for l in links {
                    let link = self.links.get_mut(&l).expect("indexed link is active");
                    let dir = usize::from(link.contact.a().0 as usize != node);
                    link.queue.push_back((dir, id));
                    self.mark_dirty(l);
                }
                true
            }
            Ok(InsertOutcome::NoFit { expired }) => {
                self.drops.ttl += expired.len() as u64;
                self.drops.no_fit += 1;
                false
            }
            Err(BufferError::DuplicateId(_) | BufferError::NotLive(_)) => false,
        }
    }

    fn mark_dirty(&mut self, l: LinkId) {
        if self.dirty_set.insert(l) {
            self.dirty.push_back(l);
        }
    }

    fn drain(&mut self) {
        while let Some(l) = self.dirty.pop_front() {
            self.dirty_set.remove(&l);
            self.pump(l);
        }
    }

    fn decision(&self, l: LinkId, dir: usize, id: MessageId) -> Option<ForwardKind> {
        let link = self.links.get(&l)?;
        let (from, to) = endpoints(&link.contact, dir);
        let buffer = &self.buffers[from.0 as usize];
        let entry = buffer.get(id)?;
        let carrier = Carrier {
            node: from,
            view: &link.views[dir],
            buffer,
            now: self.now,
        };
        let peer = EncounterSummary {
            peer: to,
            view: &link.views[1 - dir],
            carried: self.buffers[to.0 as usize].ids(),
            consumed: &self.consumed[to.0 as usize],
        };
        decide(&carrier, &peer, entry)
    }

    fn pump(&mut self, l: LinkId) {
        loop {
            let Some(link) = self.links.get_mut(&l) else {
                return;
            };
            if link.in_flight.is_some() {
                return;
            }
            let Some((dir, id)) = link.queue.pop_front() else {
                return;
            };
            if link.sent.contains(&id) {
                continue;
            }
            let Some(kind) = self.decision(l, dir, id) else {
                continue;
            };
            let link = self.links.get_mut(&l).expect("checked above");
            link.sent.insert(id);
            match self.scenario.transfer {
                TransferModel::Instantaneous => self.apply(l, dir, id, kind),
                TransferModel::Bandwidth { .. } => {
                    let (from, to) = endpoints(&link.contact, dir);
                    link.in_flight = Some((dir, id));
                    let size = self.buffers[from.0 as usize].get(id).expect("decided on it").message.size;
                    let done = self.now.after(self.scenario.transfer.duration(size));
                    let kind = EventKind::TransferComplete {
                        link: l,
                        message: id,
                        from,
                        to,
                    };
                    self.queue.push(done, kind, (id.0, u64::from(from.0), u64::from(to.0)));
                    return;
                }
            }
        }
    }

    fn transfer_complete(&mut self, l: LinkId, id: MessageId) {
        let Some(link) = self.links.get_mut(&l) else {
            return;
        };
        let Some((dir, _)) = link.in_flight.take() else {
            return;
        };
        // the carrier may have lost the message or its copies meanwhile
        if let Some(kind) = self.decision(l, dir, id) {
            self.apply(l, dir, id, kind);
        }
        self.mark_dirty(l);
    }

    fn apply(&mut self, l: LinkId, dir: usize, id: MessageId, kind: ForwardKind) {
        let (from, to) = endpoints(&self.links[&l].contact, dir);
        let (fi, ti) = (from.0 as usize, to.0 as usize);
        let msg = self.buffers[fi].get(id).expect("carrier holds the message").message.clone();
        let held = self.buffers[ti].get(id).is_some();
        let done = match kind {
            ForwardKind::Deliver => {
                if self.scenario.is_recipient(to, &msg) && self.consumed[ti].insert(id) {
                    self.deliveries.push(DeliveryRecord {
                        message: id,
                        recipient: to,
                        delivered_at: self.now,
                        created_at: msg.created_at,
                    });
                }
                if let Addressing::ContentType(_) = msg.addressing {
                    self.store(ti, msg, 1);
                }
                true
            }
            ForwardKind::Replicate => self.store(ti, msg, 1),
            ForwardKind::TransferCopies(n) => {
                let stored = self.store(ti, msg, n);
                if stored {
                    let entry = self.buffers[fi].get_mut(id).expect("carrier holds the message");
                    entry.copies -= n;
                }
                stored
            }
        };
        if done {
            self.note_copies(id);
            self.transfers_to_holders += u64::from(held);
            self.forwardings += 1;
            self.transfers.push(TransferRecord {
                message: id,
                from,
                to,
                at: self.now,
                kind,
            });
        }
    }
}
