//! Swap-regret base for squared loss: one OGD instance per grid endpoint,
//! mean-preserving two-endpoint rounding, and a stationary distribution of
//! the induced rounding chain as the round's prediction law.

use rand_chacha::ChaCha8Rng;

use crate::dist::PredictionDistribution;
use crate::error::{Error, Result};
use crate::forecasters::stationary::{stationary_distribution, stationary_residual};
use crate::forecasters::{Forecaster, RoundPrediction};
use crate::learners::OgdState;
use crate::partition::Partition;

/// Rounding distribution `H(a)` over the two endpoints of the interval
/// containing `a`, linear in distance so that `E[s] = a`.
pub fn round_to_endpoints(lo: f64, hi: f64, a: f64) -> (f64, f64) {
    debug_assert!(lo <= a && a <= hi);
    if hi == lo {
        return (1.0, 0.0);
    }
    let p_lo = ((hi - a) / (hi - lo)).clamp(0.0, 1.0);
    (p_lo, 1.0 - p_lo)
}

pub struct SwapL2Base {
    partition: Partition,
    /// Sorted distinct interval endpoints; the prediction grid.
    grid: Vec<f64>,
    ogd: Vec<OgdState>,
    rng: ChaCha8Rng,
    pending: Option<Vec<f64>>,
    residual_max: f64,
    rounding_gap_max: f64,
}

impl SwapL2Base {
    pub fn new(partition: Partition, rng: ChaCha8Rng) -> Result<Self> {
        let dom = partition.domain();
        if dom.lo != 0.0 || dom.hi != 1.0 {
            return Err(Error::InvalidArgument(format!(
                "partition covers [{}, {}], need [0, 1]",
                dom.lo, dom.hi
            )));
        }
        let grid = partition.endpoints();
        let ogd = vec![OgdState::new(); grid.len()];
        Ok(SwapL2Base {
            partition,
            grid,
            ogd,
            rng,
            pending: None,
            residual_max: 0.0,
            rounding_gap_max: 0.0,
        })
    }

    /// Worst l1 residual `||P Q - P||_1` over all rounds so far.
    pub fn residual_max(&self) -> f64 {
        self.residual_max
    }

    /// Worst `|E_{s ~ H(a)}[s] - a|` over all roundings so far.
    pub fn rounding_gap_max(&self) -> f64 {
        self.rounding_gap_max
    }
}

impl Forecaster for SwapL2Base {
    fn next_distribution(&mut self) -> Result<RoundPrediction> {
        if self.pending.is_some() {
            return Err(Error::Contract(
                "next_distribution called twice without observe".into(),
            ));
        }
        let m = self.grid.len();
        let mut rows: Vec<Vec<(usize, f64)>> = Vec::with_capacity(m);
        for s in 0..m {
            let a = self.ogd[s].action();
            // interval j has endpoints grid[j], grid[j + 1]
            let j = self.partition.locate(a)?;
            let (lo, hi) = (self.grid[j], self.grid[j + 1]);
            let (p_lo, p_hi) = round_to_endpoints(lo, hi, a);
            let gap = (p_lo * lo + p_hi * hi - a).abs();
            self.rounding_gap_max = self.rounding_gap_max.max(gap);
            rows.push(vec![(j, p_lo), (j + 1, p_hi)]);
        }
        let pi = stationary_distribution(&rows)?;
        self.residual_max = self.residual_max.max(stationary_residual(&pi, &rows));

        let dist = PredictionDistribution::from_atoms(
            self.grid
                .iter()
                .zip(&pi)
                .filter(|&(_, &w)| w > 0.0)
                .map(|(&g, &w)| (g, w))
                .collect(),
        )?;
        let prediction = dist.sample(&mut self.rng);
        self.pending = Some(pi);
        Ok(RoundPrediction {
            dist,
            prediction,
            raw_dist: None,
        })
    }

    fn observe(&mut self, y: bool) -> Result<()> {
        let pi = self
            .pending
            .take()
            .ok_or_else(|| Error::Contract("observe called before next_distribution".into()))?;
        for (s, &w) in pi.iter().enumerate() {
            self.ogd[s].step(w, y);
        }
        Ok(())
    }

    fn diagnostics(&self) -> Vec<(&'static str, f64)> {
        vec![
            ("stationary_residual_max", self.residual_max),
            ("rounding_gap_max", self.rounding_gap_max),
        ]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::partition::{unif_part, Interval};
    use rand::{Rng, SeedableRng};

    #[test]
    fn rounding_examples() {
        // a at an endpoint: point mass there
        assert_eq!(round_to_endpoints(0.0, 1.0, 0.0), (1.0, 0.0));
        assert_eq!(round_to_endpoints(0.0, 1.0, 1.0), (0.0, 1.0));
        // interval [0, 1], a = 0.3: (0.7, 0.3)
        let (p_lo, p_hi) = round_to_endpoints(0.0, 1.0, 0.3);
        assert!((p_lo - 0.7).abs() < 1e-15 && (p_hi - 0.3).abs() < 1e-15);
    }

    #[test]
    fn rounding_is_mean_preserving_on_random_intervals() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for _ in 0..1000 {
            let lo: f64 = rng.random_range(0.0..0.9);
            let hi: f64 = rng.random_range(lo + 1e-6..1.0);
            let a = rng.random_range(lo..=hi);
            let (p_lo, p_hi) = round_to_endpoints(lo, hi, a);
            assert!((p_lo * lo + p_hi * hi - a).abs() <= 1e-12);
        }
    }

    #[test]
    fn stationary_law_is_respected_every_round() {
        let partition = unif_part(Interval::closed(0.0, 1.0), 8).unwrap();
        let mut fc = SwapL2Base::new(partition, ChaCha8Rng::seed_from_u64(4)).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..300 {
            let rp = fc.next_distribution().unwrap();
            rp.dist.validate().unwrap();
            assert!(fc.grid.contains(&rp.prediction));
            fc.observe(rng.random_bool(0.35)).unwrap();
        }
        assert!(fc.residual_max() <= 1e-8, "residual {}", fc.residual_max());
        assert!(fc.rounding_gap_max() <= 1e-12);
    }
}
