//! Forecasting algorithms. Each one speaks the same round protocol: emit a
//! prediction distribution (sampling its own prediction from a seeded RNG),
//! then consume the revealed outcome, strictly alternating.

mod epoch;
mod hu;
mod simple;
mod stationary;
mod swap_kl;
mod swap_l2;

pub use epoch::{EpochFramework, EpochVariant};
pub use hu::{eq3_grid_size, hu_uniform, HuForecaster};
pub use simple::{SimpleEpoch, SimpleEpochPkl};
pub use stationary::stationary_distribution;
pub use swap_kl::SwapKlBase;
pub use swap_l2::SwapL2Base;

use crate::dist::PredictionDistribution;
use crate::error::Result;

/// What a forecaster announces at the start of a round.
#[derive(Debug, Clone)]
pub struct RoundPrediction {
    /// Distribution over the predictions the forecaster may announce.
    pub dist: PredictionDistribution,
    /// The sampled prediction; an atom of `dist`.
    pub prediction: f64,
    /// Pre-rounding distribution, for algorithms that first randomize over a
    /// continuum and then push forward onto their grid. Diagnostics only.
    pub raw_dist: Option<PredictionDistribution>,
}

/// The round contract. `next_distribution` and `observe` are called exactly
/// once per round, in that order.
pub trait Forecaster {
    fn next_distribution(&mut self) -> Result<RoundPrediction>;
    fn observe(&mut self, y: bool) -> Result<()>;

    /// Named worst-case internals accumulated over the run (residuals,
    /// rounding gaps, ...). Used by the test suites; empty by default.
    fn diagnostics(&self) -> Vec<(&'static str, f64)> {
        Vec::new()
    }
}
