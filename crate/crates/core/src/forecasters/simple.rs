//! Epoch-doubling baselines for stationary environments: predict the
//! previous epoch's empirical outcome mean (optionally clipped in the
//! transformed domain for the KL variant).

use std::f64::consts::PI;

use crate::dist::PredictionDistribution;
use crate::error::Result;
use crate::forecasters::{Forecaster, RoundPrediction};
use crate::transform::{psi, theta};

/// Shared epoch bookkeeping: epoch `m` lasts `2^m` rounds, starting at m = 1.
#[derive(Debug, Clone)]
struct EpochClock {
    epoch: u32,
    remaining: usize,
    hits: f64,
    count: usize,
}

impl EpochClock {
    fn new() -> Self {
        EpochClock {
            epoch: 1,
            remaining: 2,
            hits: 0.0,
            count: 0,
        }
    }

    /// Records an outcome; returns the finished epoch's mean at a boundary.
    fn observe(&mut self, y: bool) -> Option<f64> {
        self.hits += f64::from(y);
        self.count += 1;
        self.remaining -= 1;
        if self.remaining > 0 {
            return None;
        }
        let mean = self.hits / self.count as f64;
        self.epoch += 1;
        self.remaining = 2usize.saturating_pow(self.epoch);
        self.hits = 0.0;
        self.count = 0;
        Some(mean)
    }

    fn epoch_len(&self) -> usize {
        2usize.saturating_pow(self.epoch)
    }
}

/// Deterministic point-mass forecaster: epoch `m` predicts epoch `m-1`'s
/// empirical mean, starting from 1/2.
#[derive(Debug, Clone)]
pub struct SimpleEpoch {
    clock: EpochClock,
    prediction: f64,
}

impl Default for SimpleEpoch {
    fn default() -> Self {
        Self::new()
    }
}

impl SimpleEpoch {
    pub fn new() -> Self {
        SimpleEpoch {
            clock: EpochClock::new(),
            prediction: 0.5,
        }
    }

    pub fn prediction(&self) -> f64 {
        self.prediction
    }
}

impl Forecaster for SimpleEpoch {
    fn next_distribution(&mut self) -> Result<RoundPrediction> {
        Ok(RoundPrediction {
            dist: PredictionDistribution::point_mass(self.prediction),
            prediction: self.prediction,
            raw_dist: None,
        })
    }

    fn observe(&mut self, y: bool) -> Result<()> {
        if let Some(mean) = self.clock.observe(y) {
            self.prediction = mean;
        }
        Ok(())
    }
}

/// KL-safe variant: the running mean is clipped away from the boundary in
/// the transformed domain, with clip radius
/// `d_m = min(pi/4, 8 pi sqrt(iota / s_m))` shrinking as epochs grow.
#[derive(Debug, Clone)]
pub struct SimpleEpochPkl {
    clock: EpochClock,
    iota: f64,
    y_hat: f64,
    prediction: f64,
}

impl SimpleEpochPkl {
    pub fn new(iota: f64) -> Self {
        let clock = EpochClock::new();
        let mut s = SimpleEpochPkl {
            clock,
            iota,
            y_hat: 0.5,
            prediction: 0.5,
        };
        s.prediction = s.clipped_prediction();
        s
    }

    fn clip_radius(&self) -> f64 {
        let s_m = self.clock.epoch_len() as f64;
        (PI / 4.0).min(8.0 * PI * (self.iota / s_m).sqrt())
    }

    fn clipped_prediction(&self) -> f64 {
        let d = self.clip_radius();
        psi(theta(self.y_hat).clamp(d, PI - d))
    }

    pub fn prediction(&self) -> f64 {
        self.prediction
    }
}

impl Forecaster for SimpleEpochPkl {
    fn next_distribution(&mut self) -> Result<RoundPrediction> {
        Ok(RoundPrediction {
            dist: PredictionDistribution::point_mass(self.prediction),
            prediction: self.prediction,
            raw_dist: None,
        })
    }

    fn observe(&mut self, y: bool) -> Result<()> {
        if let Some(mean) = self.clock.observe(y) {
            self.y_hat = mean;
            self.prediction = self.clipped_prediction();
        }
        Ok(())
    }
}
