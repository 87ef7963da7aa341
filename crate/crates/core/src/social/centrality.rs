//! Cumulative-window (C-Window) centrality for Bubble Rap.

use std::collections::BTreeSet;

use crate::model::NodeId;

/// Default window length: six hours.
pub const DEFAULT_WINDOW: f64 = 6.0 * 3600.0;

#[derive(Debug, Clone, PartialEq)]
pub struct CentralityState {
    owner: NodeId,
    window_duration: f64,
    current: BTreeSet<NodeId>,
    global_counts: Vec<u32>,
    local_counts: Vec<u32>,
    global: f64,
    local: f64,
}

impl CentralityState {
    pub fn new(owner: NodeId, window_duration: f64) -> Self {
        CentralityState {
            owner,
            window_duration,
            current: BTreeSet::new(),
            global_counts: Vec::new(),
            local_counts: Vec::new(),
            global: 0.0,
            local: 0.0,
        }
    }

    pub fn owner(&self) -> NodeId {
        self.owner
    }

    pub fn window_duration(&self) -> f64 {
        self.window_duration
    }

    pub fn record_encounter(&mut self, peer: NodeId) {
        self.current.insert(peer);
    }

    pub fn global_centrality(&self) -> f64 {
        self.global
    }

    pub fn local_centrality(&self) -> f64 {
        self.local
    }

    pub fn completed_windows(&self) -> usize {
        self.global_counts.len()
    }

    /// Closes the current window. Local counts only include peers that are
    /// in `community` at rollover time.
    pub fn cwindow_update(&mut self, community: &BTreeSet<NodeId>) {
        let global = self.current.len() as u32;
        let local = self.current.intersection(community).count() as u32;
        self.global_counts.push(global);
        self.local_counts.push(local);
        self.current.clear();
        self.global = mean(&self.global_counts);
        self.local = mean(&self.local_counts);
    }
}

fn mean(counts: &[u32]) -> f64 {
    if counts.is_empty() {
        return 0.0;
    }
    counts.iter().map(|&c| f64::from(c)).sum::<f64>() / counts.len() as f64
}
