//! Peer-indexed weights and node importance for dLife.
//!
//! dLife's own importance formula lives outside this code base. The
//! recurrence used here is a stand-in: a damped sum over the neighbours met,
//! each weighted by the social weight towards it,
//!
//! `importance(a) = alpha * Σ_b w(a, b) * importance_prev(b) + (1 - alpha)`
//!
//! with `alpha = 0.8` and every node starting at 1.0. It only serves to
//! break ties when neither node has a weight towards the destination.

use serde::{Deserialize, Serialize};

use super::weights::TimeEvolvingWeights;
use crate::model::NodeId;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ImportanceParams {
    pub alpha: f64,
    pub initial: f64,
}

impl Default for ImportanceParams {
    fn default() -> Self {
        ImportanceParams {
            alpha: 0.8,
            initial: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PeerSocialState {
    pub weights: TimeEvolvingWeights<NodeId>,
    pub importance: f64,
}

impl PeerSocialState {
    pub fn new(owner: NodeId, samples_per_day: usize, initial_importance: f64) -> Self {
        PeerSocialState {
            weights: TimeEvolvingWeights::new(owner, samples_per_day),
            importance: initial_importance,
        }
    }

    pub fn dlife_weight(&self, peer: NodeId, sample: usize) -> f64 {
        self.weights.weight(peer, sample)
    }
}

/// One importance step for every node. `met[a]` lists `(b, w(a, b))` for
/// the neighbours of node index `a`; `previous` is indexed the same way.
pub fn dlife_importance(alpha: f64, met: &[Vec<(NodeId, f64)>], previous: &[f64]) -> Vec<f64> {
    met.iter()
        .map(|neighbours| {
            let pull: f64 = neighbours
                .iter()
                .map(|&(b, w)| w * previous[b.0 as usize])
                .sum();
            alpha * pull + (1.0 - alpha)
        })
        .collect()
}
