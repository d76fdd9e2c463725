//! Swap-regret base for log loss: one closed-form weighted-log-loss learner
//! per grid point, variance-weighted two-endpoint rounding in the
//! transformed domain, and a stationary prediction law, all clipped inside
//! `[eta, 1 - eta]`.

use rand_chacha::ChaCha8Rng;

use crate::dist::PredictionDistribution;
use crate::error::{Error, Result};
use crate::forecasters::stationary::{stationary_distribution, stationary_residual};
use crate::forecasters::{Forecaster, RoundPrediction};
use crate::learners::EwooState;
use crate::partition::Partition;
use crate::transform::{psi, theta};

/// Rounding weights onto the outcome-space endpoints `d < b` of the
/// transformed interval containing `a`: probabilities proportional to the
/// opposite distances scaled by the endpoint variances.
pub fn kl_round_to_endpoints(d: f64, b: f64, a: f64) -> (f64, f64) {
    let wd = ((b - a) / (b * (1.0 - b))).max(0.0);
    let wb = ((a - d) / (d * (1.0 - d))).max(0.0);
    let s = wd + wb;
    if s <= 0.0 {
        return (1.0, 0.0);
    }
    (wd / s, wb / s)
}

pub struct SwapKlBase {
    partition: Partition,
    /// Outcome-space grid: `psi` of every transformed endpoint, ascending.
    grid: Vec<f64>,
    eta: f64,
    horizon: usize,
    ewoo: Vec<EwooState>,
    rng: ChaCha8Rng,
    pending: Option<Vec<f64>>,
    residual_max: f64,
    range_violation_max: f64,
}

impl SwapKlBase {
    /// `partition` lives in the transformed domain `[theta(eta), theta(1-eta)]`.
    pub fn new(partition: Partition, eta: f64, horizon: usize, rng: ChaCha8Rng) -> Result<Self> {
        if !(eta > 0.0 && eta <= 0.5) {
            return Err(Error::InvalidArgument(format!("eta {eta} outside (0, 1/2]")));
        }
        let dom = partition.domain();
        if dom.lo != theta(eta) || dom.hi != theta(1.0 - eta) {
            return Err(Error::InvalidArgument(
                "partition domain must be [theta(eta), theta(1 - eta)]".into(),
            ));
        }
        let grid: Vec<f64> = partition.endpoints().iter().map(|&z| psi(z)).collect();
        if grid.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidArgument(
                "transformed endpoints collapse in outcome space".into(),
            ));
        }
        let ewoo = vec![EwooState::new(); grid.len()];
        Ok(SwapKlBase {
            partition,
            grid,
            eta,
            horizon,
            ewoo,
            rng,
            pending: None,
            residual_max: 0.0,
            range_violation_max: 0.0,
        })
    }

    pub fn eta(&self) -> f64 {
        self.eta
    }

    pub fn residual_max(&self) -> f64 {
        self.residual_max
    }

    /// Worst excursion of any learner action outside `[1/(T+1), 1-1/(T+1)]`.
    pub fn range_violation_max(&self) -> f64 {
        self.range_violation_max
    }
}

impl Forecaster for SwapKlBase {
    fn next_distribution(&mut self) -> Result<RoundPrediction> {
        if self.pending.is_some() {
            return Err(Error::Contract(
                "next_distribution called twice without observe".into(),
            ));
        }
        let m = self.grid.len();
        let bound = 1.0 / (self.horizon as f64 + 1.0);
        let dom = self.partition.domain();
        let mut rows: Vec<Vec<(usize, f64)>> = Vec::with_capacity(m);
        for s in 0..m {
            let a = self.ewoo[s].action();
            let violation = (bound - a).max(a - (1.0 - bound)).max(0.0);
            self.range_violation_max = self.range_violation_max.max(violation);
            if violation > 1e-9 {
                return Err(Error::Contract(format!(
                    "learner action {a} escaped [{bound}, {}]",
                    1.0 - bound
                )));
            }
            let th = theta(a).clamp(dom.lo, dom.hi);
            let j = self.partition.locate(th)?;
            let (d, b) = (self.grid[j], self.grid[j + 1]);
            let (p_lo, p_hi) = kl_round_to_endpoints(d, b, a);
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
            self.ewoo[s].update(w.min(1.0), y);
        }
        Ok(())
    }

    fn diagnostics(&self) -> Vec<(&'static str, f64)> {
        vec![
            ("stationary_residual_max", self.residual_max),
            ("ewoo_range_violation_max", self.range_violation_max),
        ]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::partition::{unif_part, Interval};
    use rand::{Rng, SeedableRng};
    use std::f64::consts::PI;

    fn theta_partition(eta: f64, n: usize) -> Partition {
        unif_part(Interval::closed(theta(eta), theta(1.0 - eta)), n).unwrap()
    }

    #[test]
    fn rounding_examples() {
        // symmetric weights: d = 0.25, b = 0.75, a = 0.5 -> (0.5, 0.5)
        let (p_lo, p_hi) = kl_round_to_endpoints(0.25, 0.75, 0.5);
        assert!((p_lo - 0.5).abs() < 1e-15 && (p_hi - 0.5).abs() < 1e-15);
        // a at an endpoint: point mass
        assert_eq!(kl_round_to_endpoints(0.25, 0.75, 0.25), (1.0, 0.0));
        assert_eq!(kl_round_to_endpoints(0.25, 0.75, 0.75), (0.0, 1.0));
    }

    // One-step rounding gap for log loss: E_{s~H(a)}[l(s, y)] - l(a, y)
    // is at most the squared transformed width, provided that width <= pi/2.
    #[test]
    fn log_loss_rounding_gap_is_bounded_by_squared_width() {
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        let log_loss = |p: f64, y: f64| -> f64 { -y * p.ln() - (1.0 - y) * (1.0 - p).ln() };
        for _ in 0..1000 {
            let u: f64 = rng.random_range(0.05..PI - 0.6);
            let width: f64 = rng.random_range(1e-3..(PI / 2.0).min(PI - 0.05 - u));
            let v = u + width;
            let (d, b) = (psi(u), psi(v));
            let th_a = rng.random_range(u..=v);
            let a = psi(th_a);
            let (p_lo, p_hi) = kl_round_to_endpoints(d, b, a);
            for y in [0.0, 1.0] {
                let gap = p_lo * log_loss(d, y) + p_hi * log_loss(b, y) - log_loss(a, y);
                assert!(
                    gap <= width * width + 1e-9,
                    "u={u} v={v} a={a} y={y} gap={gap}"
                );
            }
        }
    }

    #[test]
    fn actions_stay_in_range_and_chain_is_stationary() {
        let horizon = 255;
        let eta = 1.0 / (horizon as f64 + 1.0);
        let p = theta_partition(eta, 6);
        let mut fc = SwapKlBase::new(p, eta, horizon, ChaCha8Rng::seed_from_u64(8)).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..horizon {
            let rp = fc.next_distribution().unwrap();
            rp.dist.validate().unwrap();
            for &(atom, _) in rp.dist.atoms() {
                assert!(atom >= eta - 1e-12 && atom <= 1.0 - eta + 1e-12);
            }
            fc.observe(rng.random_bool(0.2)).unwrap();
        }
        assert_eq!(fc.range_violation_max(), 0.0);
        assert!(fc.residual_max() <= 1e-8);
    }

    #[test]
    fn grid_spans_eta_to_one_minus_eta() {
        let eta = 0.05;
        let p = theta_partition(eta, 4);
        let fc = SwapKlBase::new(p, eta, 100, ChaCha8Rng::seed_from_u64(1)).unwrap();
        assert!((fc.grid[0] - eta).abs() < 1e-12);
        assert!((fc.grid[fc.grid.len() - 1] - (1.0 - eta)).abs() < 1e-12);
    }
}
