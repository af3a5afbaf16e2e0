//! Comparison policies sharing the [`Policy`](crate::policy::Policy)
//! interface.

mod linucb;
mod sync_linucb;

pub use linucb::{LinUcb, LinUcbConfig, RidgeArmState};
pub use sync_linucb::{MixedModelState, SyncLinUcb, SyncLinUcbConfig};

use crate::error::Result;
use crate::fcom::{Fcom, FcomConfig};

/// Centralized collaborative UCB: the federated estimator with every
/// observation sent straight to the server.
pub fn clucb(cfg: FcomConfig, n_units: usize, dim: usize, seed: u64) -> Result<Fcom> {
    Fcom::centralized(cfg, n_units, dim, seed)
}
