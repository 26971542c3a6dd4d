//! Real-valued system embedding and the detectors.

mod ep;
mod mmse;
mod mrc;
mod real_model;
mod transform;

pub use ep::{
    discrete_moments, ep_af_detect, ep_cavity, ep_posterior, ep_t_detect, ep_update_sites, Cavity, EpConfig,
    EpSiteParams, GaussianStats, Inversion, PosteriorEngine, StatsRole, CAVITY_THRESHOLD, VARIANCE_FLOOR,
};
pub use mmse::{mmse_detect, mmse_estimate};
pub use mrc::{mrc_detect, MrcConfig};
pub use real_model::{stack, to_real_model, unstack, Domain, RealSystemModel};
pub use transform::{transform_stats_af_to_time, transform_stats_time_to_af};

use crate::C64;

/// Hard decisions of one detector run on one frame.
#[derive(Clone, Debug, PartialEq)]
pub struct DetectorOutput {
    pub hard_symbols: Vec<C64>,
    pub iterations_used: usize,
    /// Real multiplications booked while detecting.
    pub mult_count: u64,
}
