//! Doubling-epoch framework: each epoch rebuilds a non-uniform partition
//! around the previous epoch's empirical mean and runs a fresh base
//! forecaster over it. The first epoch deterministically predicts 1/2.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::dist::PredictionDistribution;
use crate::env::stream_rng;
use crate::error::Result;
use crate::forecasters::{Forecaster, HuForecaster, RoundPrediction, SwapKlBase};
use crate::partition::{build_nonuniform_cal, build_nonuniform_pkl, Partition};
use crate::transform::theta;

/// Outer-band resolution rule for the outcome-space framework.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EpochVariant {
    /// `K = ceil(cbrt((1 + C) / iota))`
    Cal2,
    /// `K = ceil(cbrt((1 + C)^2 / (iota T)))`
    Cal1,
}

enum Layout {
    Cal(EpochVariant),
    /// Transformed-domain layout with clip level `eta`.
    Pkl { eta: f64 },
}

type BaseFactory = Box<dyn FnMut(&Partition, ChaCha8Rng) -> Result<Box<dyn Forecaster>>>;

pub struct EpochFramework {
    factory: BaseFactory,
    layout: Layout,
    c_guess: f64,
    horizon: usize,
    iota: f64,
    q_max: usize,
    epoch: u32,
    remaining: usize,
    hits: f64,
    count: usize,
    base: Option<Box<dyn Forecaster>>,
    rng: ChaCha8Rng,
    diag: BTreeMap<&'static str, f64>,
}

impl EpochFramework {
    /// Framework over an arbitrary base-forecaster factory (outcome space).
    pub fn with_base(
        factory: BaseFactory,
        variant: EpochVariant,
        c_guess: f64,
        horizon: usize,
        iota: f64,
        rng: ChaCha8Rng,
    ) -> Self {
        Self::build(factory, Layout::Cal(variant), c_guess, horizon, iota, rng)
    }

    /// The default instantiation: expert-driven base over each epoch's
    /// non-uniform partition.
    pub fn hu(
        variant: EpochVariant,
        c_guess: f64,
        horizon: usize,
        iota: f64,
        rng: ChaCha8Rng,
    ) -> Self {
        let factory: BaseFactory = Box::new(move |partition, child_rng| {
            Ok(Box::new(HuForecaster::new(
                partition.clone(),
                horizon,
                child_rng,
            )?))
        });
        Self::with_base(factory, variant, c_guess, horizon, iota, rng)
    }

    /// Transformed-domain instantiation with the log-loss swap base and
    /// `eta = 1/(T+1)`.
    pub fn pkl(c_guess: f64, horizon: usize, iota: f64, rng: ChaCha8Rng) -> Self {
        let eta = 1.0 / (horizon as f64 + 1.0);
        let factory: BaseFactory = Box::new(move |partition, child_rng| {
            Ok(Box::new(SwapKlBase::new(
                partition.clone(),
                eta,
                horizon,
                child_rng,
            )?))
        });
        Self::build(factory, Layout::Pkl { eta }, c_guess, horizon, iota, rng)
    }

    fn build(
        factory: BaseFactory,
        layout: Layout,
        c_guess: f64,
        horizon: usize,
        iota: f64,
        rng: ChaCha8Rng,
    ) -> Self {
        assert!(c_guess >= 0.0, "non-stationarity guess must be nonnegative");
        let q_max = (horizon.max(2) as f64).log2().ceil() as usize;
        EpochFramework {
            factory,
            layout,
            c_guess,
            horizon,
            iota,
            q_max,
            epoch: 1,
            remaining: 2,
            hits: 0.0,
            count: 0,
            base: None,
            rng,
            diag: BTreeMap::new(),
        }
    }

    /// Partition for the epoch that follows a completed epoch of length
    /// `s_prev` with empirical mean `y_hat`.
    fn next_partition(&self, y_hat: f64, s_prev: f64, s_cur: f64) -> Partition {
        match &self.layout {
            Layout::Cal(variant) => {
                let r = (self.iota / s_prev).sqrt() + self.c_guess / s_prev;
                let a = (y_hat - 2.0 * r).max(0.0);
                let b = (y_hat + 2.0 * r).min(1.0);
                let n_inner = ((s_cur * (b - a) * (b - a) / self.iota).cbrt().ceil() as usize).max(1);
                let k_outer = match variant {
                    EpochVariant::Cal2 => ((1.0 + self.c_guess) / self.iota).cbrt(),
                    EpochVariant::Cal1 => ((1.0 + self.c_guess) * (1.0 + self.c_guess)
                        / (self.iota * self.horizon as f64))
                        .cbrt(),
                };
                let k_outer = (k_outer.ceil() as usize).max(1);
                build_nonuniform_cal(y_hat, r, n_inner, k_outer, self.q_max)
            }
            Layout::Pkl { eta } => {
                let r = 2.0 * PI * ((self.iota + self.c_guess) / s_prev).sqrt();
                let center = theta(y_hat);
                let (dom_lo, dom_hi) = (theta(*eta), theta(1.0 - eta));
                let a = (center - 2.0 * r).clamp(dom_lo, dom_hi);
                let b = (center + 2.0 * r).clamp(dom_lo, dom_hi);
                let width = b - a;
                let ln_t = (self.horizon.max(2) as f64).ln();
                let n_tilde = (s_cur * width * width / self.iota).cbrt().ceil() as usize;
                let n_inner = n_tilde.max((2.0 * width / PI).ceil() as usize).max(1);
                let k_tilde = ((1.0 + self.c_guess) / (ln_t * ln_t)).cbrt().ceil() as usize;
                let k_outer = k_tilde.max(2);
                build_nonuniform_pkl(center, r, n_inner, k_outer, self.q_max, *eta)
            }
        }
    }

    fn merge_diagnostics(&mut self) {
        if let Some(base) = &self.base {
            for (k, v) in base.diagnostics() {
                let e = self.diag.entry(k).or_insert(0.0);
                *e = e.max(v);
            }
        }
    }

    fn advance_epoch(&mut self) -> Result<()> {
        let y_hat = self.hits / self.count as f64;
        let s_prev = 2f64.powi(self.epoch as i32);
        self.merge_diagnostics();
        self.epoch += 1;
        let s_cur = 2f64.powi(self.epoch as i32);
        self.remaining = 2usize.saturating_pow(self.epoch);
        self.hits = 0.0;
        self.count = 0;
        let partition = self.next_partition(y_hat, s_prev, s_cur);
        let child = stream_rng(self.rng.random(), u64::from(self.epoch));
        self.base = Some((self.factory)(&partition, child)?);
        Ok(())
    }

    pub fn epoch(&self) -> u32 {
        self.epoch
    }
}

impl Forecaster for EpochFramework {
    fn next_distribution(&mut self) -> Result<RoundPrediction> {
        if self.remaining == 0 {
            self.advance_epoch()?;
        }
        match &mut self.base {
            Some(base) => base.next_distribution(),
            None => Ok(RoundPrediction {
                dist: PredictionDistribution::point_mass(0.5),
                prediction: 0.5,
                raw_dist: None,
            }),
        }
    }

    fn observe(&mut self, y: bool) -> Result<()> {
        if let Some(base) = &mut self.base {
            base.observe(y)?;
        }
        self.hits += f64::from(y);
        self.count += 1;
        self.remaining -= 1;
        Ok(())
    }

    fn diagnostics(&self) -> Vec<(&'static str, f64)> {
        let mut merged = self.diag.clone();
        if let Some(base) = &self.base {
            for (k, v) in base.diagnostics() {
                let e = merged.entry(k).or_insert(0.0);
                *e = e.max(v);
            }
        }
        merged.into_iter().collect()
    }
}
