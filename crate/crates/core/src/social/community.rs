//! Distributed k-clique community detection for Bubble Rap.
//!
//! Each node tracks cumulative contact time per peer. A peer whose total
//! reaches the familiar threshold joins the familiar set and the local
//! community. Any other peer joins the local community once its familiar
//! set shares at least `k - 1` members with that community.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::model::{Contact, NodeId};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CommunityParams {
    pub k: usize,
    pub familiar_threshold: f64,
}

impl Default for CommunityParams {
    fn default() -> Self {
        CommunityParams {
            k: 5,
            familiar_threshold: 7200.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CommunityState {
    owner: NodeId,
    params: CommunityParams,
    cumulative_contact: BTreeMap<NodeId, f64>,
    familiar: BTreeSet<NodeId>,
    community: BTreeSet<NodeId>,
}

impl CommunityState {
    pub fn new(owner: NodeId, params: CommunityParams) -> Self {
        CommunityState {
            owner,
            params,
            cumulative_contact: BTreeMap::new(),
            familiar: BTreeSet::new(),
            community: BTreeSet::from([owner]),
        }
    }

    pub fn owner(&self) -> NodeId {
        self.owner
    }

    pub fn cumulative_contact(&self, peer: NodeId) -> f64 {
        self.cumulative_contact.get(&peer).copied().unwrap_or(0.0)
    }

    pub fn familiar_set(&self) -> &BTreeSet<NodeId> {
        &self.familiar
    }

    pub fn local_community(&self) -> &BTreeSet<NodeId> {
        &self.community
    }

    /// Adds contact time with `peer`; returns true if it just became familiar.
    pub fn add_contact_time(&mut self, peer: NodeId, seconds: f64) -> bool {
        let total = self.cumulative_contact.entry(peer).or_insert(0.0);
        *total += seconds;
        if *total >= self.params.familiar_threshold && self.familiar.insert(peer) {
            self.community.insert(peer);
            return true;
        }
        false
    }

    /// Admits `peer` if its familiar set overlaps the community in at least
    /// `k - 1` members. Returns true if the community grew.
    pub fn consider(&mut self, peer: NodeId, peer_familiar: &BTreeSet<NodeId>) -> bool {
        if self.community.contains(&peer) {
            return false;
        }
        let shared = peer_familiar.intersection(&self.community).count();
        if shared >= self.params.k.saturating_sub(1) {
            self.community.insert(peer);
            return true;
        }
        false
    }
}

/// Applies the end of `contact` to both endpoint states. `states` is
/// indexed by node id.
pub fn kclique_update(states: &mut [CommunityState], contact: &Contact) {
    let (a, b) = (contact.a().0 as usize, contact.b().0 as usize);
    let secs = contact.duration();
    states[a].add_contact_time(contact.b(), secs);
    states[b].add_contact_time(contact.a(), secs);
    let familiar_a = states[a].familiar.clone();
    let familiar_b = states[b].familiar.clone();
    states[a].consider(contact.b(), &familiar_b);
    states[b].consider(contact.a(), &familiar_a);
}
