//! Online-learning primitives behind the forecasters: a multi-scale
//! second-order multiplicative-weights algorithm over experts, projected
//! online gradient descent on `[0, 1]` for weighted squared loss, and the
//! closed-form weighted-log-loss iterate.

use crate::error::{Error, Result};

/// Multi-scale multiplicative weights with the second-order update
/// `w <- w * exp(-eta * (l - c) - eta^2 * (l - c)^2)`, where `c` is the
/// mixture loss of the round. Centering keeps slow learning-rate replicas
/// from hoarding mass when every raw loss shares a sign.
///
/// Each expert is replicated across a learning-rate grid `eta_k = 2^{-k}`,
/// `k = 1..=ceil(log2 T)`, with prior weight proportional to `eta_k^2`; the
/// per-expert weights reported to callers sum the scales back out.
#[derive(Debug, Clone)]
pub struct MsmwcState {
    num_experts: usize,
    rates: Vec<f64>,
    /// Row-major `[expert][scale]`; a simplex over all entries.
    weights: Vec<f64>,
    round: usize,
}

impl MsmwcState {
    pub fn new(num_experts: usize, horizon: usize) -> Self {
        assert!(num_experts >= 1, "need at least one expert");
        let scales = (horizon.max(2) as f64).log2().ceil() as usize;
        let rates: Vec<f64> = (1..=scales.max(1)).map(|k| 0.5f64.powi(k as i32)).collect();
        let rate_norm: f64 = rates.iter().map(|r| r * r).sum();
        let mut weights = Vec::with_capacity(num_experts * rates.len());
        for _ in 0..num_experts {
            for r in &rates {
                weights.push(r * r / (rate_norm * num_experts as f64));
            }
        }
        MsmwcState {
            num_experts,
            rates,
            weights,
            round: 0,
        }
    }

    pub fn num_experts(&self) -> usize {
        self.num_experts
    }

    pub fn round(&self) -> usize {
        self.round
    }

    /// Per-expert weights, collapsed over scales; sums to 1.
    pub fn expert_weights(&self) -> Vec<f64> {
        let s = self.rates.len();
        (0..self.num_experts)
            .map(|i| self.weights[i * s..(i + 1) * s].iter().sum())
            .collect()
    }

    /// Applies one round of per-expert losses in `[-1, 1]`.
    pub fn update(&mut self, losses: &[f64]) -> Result<()> {
        if losses.len() != self.num_experts {
            return Err(Error::InvalidArgument(format!(
                "expected {} losses, got {}",
                self.num_experts,
                losses.len()
            )));
        }
        for &l in losses {
            if !(-1.0..=1.0).contains(&l) {
                return Err(Error::InvalidArgument(format!(
                    "expert loss {l} outside [-1, 1]"
                )));
            }
        }
        let s = self.rates.len();
        let mixture: f64 = self
            .expert_weights()
            .iter()
            .zip(losses)
            .map(|(w, l)| w * l)
            .sum();
        let mut total = 0.0;
        for (i, &l) in losses.iter().enumerate() {
            let c = l - mixture;
            for (k, &eta) in self.rates.iter().enumerate() {
                let w = &mut self.weights[i * s + k];
                *w *= (-eta * c - eta * eta * c * c).exp();
                total += *w;
            }
        }
        for w in &mut self.weights {
            *w /= total;
        }
        self.round += 1;
        Ok(())
    }
}

/// Projected online gradient descent on `[0, 1]` for the weighted squared
/// loss `w * (a - y)^2`, with the strongly-convex step schedule
/// `step_t = 1 / (1 + sum of observed weights)`.
#[derive(Debug, Clone)]
pub struct OgdState {
    action: f64,
    cum_weight: f64,
}

impl Default for OgdState {
    fn default() -> Self {
        Self::new()
    }
}

impl OgdState {
    pub fn new() -> Self {
        OgdState {
            action: 0.5,
            cum_weight: 0.0,
        }
    }

    #[cfg(test)]
    fn with_state(action: f64, cum_weight: f64) -> Self {
        OgdState { action, cum_weight }
    }

    pub fn action(&self) -> f64 {
        self.action
    }

    pub fn step(&mut self, weight: f64, outcome: bool) {
        debug_assert!(weight >= 0.0);
        self.cum_weight += weight;
        let step = 1.0 / (1.0 + self.cum_weight);
        let y = if outcome { 1.0 } else { 0.0 };
        let grad = 2.0 * (self.action - y);
        self.action = (self.action - step * weight * grad).clamp(0.0, 1.0);
    }
}

/// Sufficient statistics of the closed-form weighted-log-loss iterate
/// `a = (hits + 1) / (mass + 2)`.
///
/// `mass` and `hits` are capped at the update count, so the action range
/// `[1/(T+1), 1 - 1/(T+1)]` holds exactly for any history of at most `T - 1`
/// unit-bounded weights, float drift included.
#[derive(Debug, Clone, Default)]
pub struct EwooState {
    mass: f64,
    hits: f64,
    updates: usize,
}

impl EwooState {
    pub fn new() -> Self {
        EwooState::default()
    }

    pub fn mass(&self) -> f64 {
        self.mass
    }

    pub fn hits(&self) -> f64 {
        self.hits
    }

    pub fn action(&self) -> f64 {
        (self.hits + 1.0) / (self.mass + 2.0)
    }

    pub fn update(&mut self, weight: f64, outcome: bool) {
        debug_assert!((0.0..=1.0).contains(&weight));
        self.updates += 1;
        self.mass = (self.mass + weight).min(self.updates as f64);
        if outcome {
            self.hits += weight;
        }
        self.hits = self.hits.min(self.mass);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn msmwc_starts_uniform_and_deterministic() {
        let a = MsmwcState::new(4, 1 << 12);
        let b = MsmwcState::new(4, 1 << 12);
        let w = a.expert_weights();
        for wi in &w {
            assert!((wi - 0.25).abs() < 1e-12);
        }
        assert_eq!(a.expert_weights(), b.expert_weights());
        assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn msmwc_equal_losses_keep_weights_fixed() {
        // equal losses center to zero, so no scale moves at all
        let mut s = MsmwcState::new(3, 1 << 12);
        s.update(&[0.7, 0.7, 0.7]).unwrap();
        for w in s.expert_weights() {
            assert!((w - 1.0 / 3.0).abs() < 1e-12);
        }
        // zero losses never move any scale
        let mut s = MsmwcState::new(3, 1 << 10);
        let before = s.expert_weights();
        s.update(&[0.0, 0.0, 0.0]).unwrap();
        for (a, b) in before.iter().zip(s.expert_weights()) {
            assert!((a - b).abs() < 1e-14);
        }
    }

    #[test]
    fn msmwc_favors_the_low_loss_expert() {
        let mut s = MsmwcState::new(4, 2);
        s.update(&[-1.0, 1.0, 1.0, 1.0]).unwrap();
        let w = s.expert_weights();
        assert!(w[0] > w[1] && w[0] > w[2] && w[0] > w[3]);
        assert!((w[1] - w[2]).abs() < 1e-15);
    }

    #[test]
    fn msmwc_rejects_out_of_range_losses() {
        let mut s = MsmwcState::new(2, 16);
        assert!(s.update(&[1.5, 0.0]).is_err());
        assert!(s.update(&[0.0]).is_err());
    }

    #[test]
    fn msmwc_stays_on_the_simplex_under_random_updates() {
        let mut s = MsmwcState::new(6, 1 << 14);
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..10_000 {
            let losses: Vec<f64> = (0..6).map(|_| rng.random_range(-1.0..1.0)).collect();
            s.update(&losses).unwrap();
        }
        let w = s.expert_weights();
        assert!(w.iter().all(|&x| x >= 0.0));
        assert!((w.iter().sum::<f64>() - 1.0).abs() <= 1e-9);
    }

    #[test]
    fn msmwc_regret_grows_sublinearly() {
        // expert 0 is best on average; fit log-log slope of the regret curve
        let n = 4;
        let mut s = MsmwcState::new(n, 10_000);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let means = [0.1f64, 0.5, 0.6, 0.7];
        let mut alg_loss = 0.0f64;
        let mut best_loss = 0.0f64;
        let mut points = Vec::new();
        for t in 1..=10_000usize {
            let losses: Vec<f64> = means
                .iter()
                .map(|m| (m + rng.random_range(-0.3..0.3)).clamp(-1.0, 1.0))
                .collect();
            let w = s.expert_weights();
            alg_loss += w.iter().zip(&losses).map(|(wi, li)| wi * li).sum::<f64>();
            best_loss += losses[0];
            s.update(&losses).unwrap();
            if t >= 64 && t.is_power_of_two() {
                points.push((t as f64, (alg_loss - best_loss).max(1e-6)));
            }
        }
        let slope = crate::harness::fit_exponent(&points).unwrap();
        assert!(slope < 0.8, "regret slope {slope}");
    }

    #[test]
    fn ogd_examples() {
        let s = OgdState::new();
        assert_eq!(s.action(), 0.5);

        // weight 0 leaves the action unchanged
        let mut s = OgdState::with_state(0.8, 3.0);
        s.step(0.0, true);
        assert_eq!(s.action(), 0.8);

        // step = 1/(1 + 9) = 0.1: 0.8 - 0.1 * 1 * 2(0.8 - 1) = 0.84
        let mut s = OgdState::with_state(0.8, 8.0);
        s.step(1.0, true);
        assert!((s.action() - 0.84).abs() < 1e-15);

        // zero gradient at the outcome
        let mut s = OgdState::with_state(1.0, 0.0);
        s.step(1.0, true);
        assert_eq!(s.action(), 1.0);
    }

    #[test]
    fn ogd_stays_in_the_unit_interval() {
        let mut s = OgdState::new();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..5_000 {
            s.step(rng.random_range(0.0..3.0), rng.random_bool(0.5));
            assert!((0.0..=1.0).contains(&s.action()));
        }
    }

    #[test]
    fn ewoo_closed_form_examples() {
        let mut s = EwooState::new();
        assert_eq!(s.action(), 0.5);
        s.update(1.0, true);
        assert!((s.action() - 2.0 / 3.0).abs() < 1e-15);
        s.update(1.0, true);
        assert!((s.action() - 0.75).abs() < 1e-15);
    }

    #[test]
    fn ewoo_action_range_is_exact() {
        let t = 257usize;
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..200 {
            let mut s = EwooState::new();
            for _ in 0..(t - 1) {
                let w: f64 = rng.random();
                s.update(w, rng.random_bool(0.7));
                let a = s.action();
                let lo = 1.0 / (t as f64 + 1.0);
                assert!(a >= lo && a <= 1.0 - lo, "a = {a}");
                assert!(s.hits() >= 0.0 && s.hits() <= s.mass());
            }
        }
    }
}
