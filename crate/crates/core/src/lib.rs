//! Sequential-prediction laboratory for adaptive online calibration.
//!
//! A forecaster repeatedly announces a distribution over probability
//! predictions, one prediction is sampled, and a binary outcome is revealed.
//! This crate implements:
//!
//! - interval partitions of the prediction space, including the non-uniform
//!   inner/outer constructions used by the epoch forecasters ([`partition`]);
//! - calibration metrics (`Cal1`, `Cal2`, pseudo `Cal2`, pseudo KL) and
//!   non-stationarity measures computed from transcripts ([`metrics`]);
//! - the online-learning primitives behind the forecasters: a multi-scale
//!   multiplicative-weights expert algorithm, projected OGD, and the
//!   closed-form weighted-log-loss iterate ([`learners`]);
//! - the forecasting algorithms themselves ([`forecasters`]);
//! - a restart meta-framework that adapts any certified forecaster to unknown
//!   non-stationarity and piecewise-stationary environments ([`meta`]);
//! - synthetic environments with controlled non-stationarity ([`env`]);
//! - an experiment harness with a CLI (`seqcal`) for sweeps, metric reports,
//!   and scaling-exponent fits ([`harness`]).

pub mod dist;
pub mod env;
mod error;
pub mod forecasters;
pub mod harness;
pub mod learners;
pub mod meta;
pub mod metrics;
pub mod partition;
pub mod transform;

pub use dist::PredictionDistribution;
pub use error::{Error, Result};
pub use metrics::{EnvTrace, MetricKind, RoundRecord, Transcript};
pub use partition::{Interval, Partition, PartitionGeometry};

/// Confidence factor `iota = c * ln(max(T, 2) / delta)`.
///
/// Every algorithm takes its log-confidence term through this single knob;
/// `c` defaults to 1 and `delta` defaults to 0.05 in the harness.
pub fn iota(horizon: usize, delta: f64, c: f64) -> f64 {
    let t = horizon.max(2) as f64;
    c * (t / delta).ln()
}
