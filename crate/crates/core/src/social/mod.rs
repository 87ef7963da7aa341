//! Per-node social metrics: interest-indexed weights for SCORP,
//! peer-indexed weights and importance for dLife, and community and
//! centrality structures for Bubble Rap.

mod centrality;
mod community;
mod dlife;
pub mod snapshot;
mod weights;

pub use centrality::{CentralityState, DEFAULT_WINDOW};
pub use community::{kclique_update, CommunityParams, CommunityState};
pub use dlife::{dlife_importance, ImportanceParams, PeerSocialState};
pub use weights::{transitive_coefficient, SocialError, TimeEvolvingWeights};

use crate::model::InterestId;

/// SCORP's per-node state: contact time towards each interest.
pub type InterestSocialState = TimeEvolvingWeights<InterestId>;
