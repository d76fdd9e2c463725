//! The expert-driven calibration forecaster: a multi-scale
//! multiplicative-weights instance over signed interval experts induces a
//! piecewise-constant potential whose sign change pins down an (at most
//! two-point) sampling distribution each round.

use rand_chacha::ChaCha8Rng;

use crate::dist::PredictionDistribution;
use crate::error::{Error, Result};
use crate::forecasters::{Forecaster, RoundPrediction};
use crate::learners::MsmwcState;
use crate::partition::Partition;

/// A sampled atom of the pre-rounding distribution: value, probability, and
/// the index of the partition interval containing the value.
#[derive(Debug, Clone, Copy)]
struct RawAtom {
    value: f64,
    prob: f64,
    interval: usize,
}

/// Two-point distribution induced by the potential
/// `phi(p) = sum_i (w[i,+] - w[i,-]) 1{p in J_i}` on the `1/T` grid.
///
/// A positive potential marks a region whose past predictions undershot the
/// outcomes, so the sampler chases the downcrossing of `phi`: all mass on 0
/// if `phi(0) <= 0`; else all mass on 1 if `phi(1) > 0`; else the first
/// adjacent grid pair `(i/T, (i+1)/T)` with `phi(i/T) phi((i+1)/T) <= 0`
/// gets probabilities inversely proportional to the potential magnitudes at
/// the pair, which zeroes the expected potential. `phi` changes value only
/// at interval boundaries, so the pair is found by walking constancy runs
/// instead of the full grid; the result matches the literal grid scan.
fn phi_two_point(partition: &Partition, vals: &[f64], grid_denom: usize) -> Vec<RawAtom> {
    let n = partition.len();
    debug_assert_eq!(vals.len(), n);
    if vals[0] <= 0.0 {
        return vec![RawAtom {
            value: 0.0,
            prob: 1.0,
            interval: 0,
        }];
    }
    if vals[n - 1] > 0.0 {
        return vec![RawAtom {
            value: 1.0,
            prob: 1.0,
            interval: n - 1,
        }];
    }

    let t = grid_denom;
    let tf = t as f64;
    let bracket = |i: usize, va: f64, ja: usize, vb: f64, jb: usize| -> Vec<RawAtom> {
        let (na, nb) = (vb.abs(), va.abs());
        let s = na + nb;
        if s == 0.0 {
            // both grid values are exactly zero; all mass on the lower point
            return vec![RawAtom {
                value: i as f64 / tf,
                prob: 1.0,
                interval: ja,
            }];
        }
        let mut atoms = Vec::with_capacity(2);
        if na > 0.0 {
            atoms.push(RawAtom {
                value: i as f64 / tf,
                prob: na / s,
                interval: ja,
            });
        }
        if nb > 0.0 {
            atoms.push(RawAtom {
                value: (i + 1) as f64 / tf,
                prob: nb / s,
                interval: jb,
            });
        }
        atoms
    };

    let mut i = 0usize; // current grid index; phi(i/T) > 0 on the prefix
    let mut j = 0usize; // interval containing i/T
    let mut v = vals[0];
    loop {
        if v == 0.0 {
            // pair (i, i+1) already qualifies
            let j2 = partition
                .locate((i + 1) as f64 / tf)
                .expect("grid point inside [0, 1]");
            return bracket(i, v, j, vals[j2], j2);
        }
        // jump to the first grid index past interval j
        let hi = partition.intervals()[j].hi;
        let mut nxt = ((hi * tf).ceil() as usize).max(i + 1);
        while nxt <= t
            && partition
                .locate(nxt as f64 / tf)
                .expect("grid point inside [0, 1]")
                == j
        {
            nxt += 1;
        }
        assert!(nxt <= t, "no sign change left of 1; case order rules this out");
        let j2 = partition
            .locate(nxt as f64 / tf)
            .expect("grid point inside [0, 1]");
        let v2 = vals[j2];
        if v * v2 <= 0.0 {
            return bracket(nxt - 1, v, j, v2, j2);
        }
        i = nxt;
        j = j2;
        v = v2;
    }
}

/// The partition-generic forecaster: an expert pair `(i, +-1)` per interval,
/// weights maintained by [`MsmwcState`], per-round sampling distribution
/// from [`phi_two_point`], predictions snapped to grid points.
pub struct HuForecaster {
    partition: Partition,
    grid: Vec<f64>,
    msmwc: MsmwcState,
    grid_denom: usize,
    rng: ChaCha8Rng,
    pending: Option<Vec<RawAtom>>,
    phi_imbalance_max: f64,
}

impl HuForecaster {
    /// `partition` must cover exactly `[0, 1]`; `horizon` sets both the
    /// sampling grid `1/T` and the expert learning-rate scales.
    pub fn new(partition: Partition, horizon: usize, rng: ChaCha8Rng) -> Result<Self> {
        let dom = partition.domain();
        if dom.lo != 0.0 || dom.hi != 1.0 {
            return Err(Error::InvalidArgument(format!(
                "partition covers [{}, {}], need [0, 1]",
                dom.lo, dom.hi
            )));
        }
        let grid = partition.grid();
        let msmwc = MsmwcState::new(2 * partition.len(), horizon);
        Ok(HuForecaster {
            partition,
            grid,
            msmwc,
            grid_denom: horizon.max(1),
            rng,
            pending: None,
            phi_imbalance_max: 0.0,
        })
    }

    pub fn partition(&self) -> &Partition {
        &self.partition
    }

    /// Largest `|E[phi]|` seen over interior (two-atom) rounds.
    pub fn phi_imbalance_max(&self) -> f64 {
        self.phi_imbalance_max
    }
}

impl Forecaster for HuForecaster {
    fn next_distribution(&mut self) -> Result<RoundPrediction> {
        if self.pending.is_some() {
            return Err(Error::Contract(
                "next_distribution called twice without observe".into(),
            ));
        }
        let w = self.msmwc.expert_weights();
        let vals: Vec<f64> = (0..self.partition.len())
            .map(|i| w[2 * i] - w[2 * i + 1])
            .collect();
        let atoms = phi_two_point(&self.partition, &vals, self.grid_denom);

        if atoms.len() == 2 {
            let imbalance = atoms
                .iter()
                .map(|a| a.prob * vals[a.interval])
                .sum::<f64>()
                .abs();
            self.phi_imbalance_max = self.phi_imbalance_max.max(imbalance);
        }

        let raw = PredictionDistribution::from_atoms(
            atoms.iter().map(|a| (a.value, a.prob)).collect(),
        )?;
        let dist = PredictionDistribution::from_atoms(
            atoms
                .iter()
                .map(|a| (self.grid[a.interval], a.prob))
                .collect(),
        )?;
        // One draw: sample the pre-rounding point, then snap to its grid point.
        let sampled = raw.sample(&mut self.rng);
        let interval = atoms
            .iter()
            .find(|a| a.value == sampled)
            .expect("sampled value is an atom")
            .interval;
        let prediction = self.grid[interval];
        self.pending = Some(atoms);
        Ok(RoundPrediction {
            dist,
            prediction,
            raw_dist: Some(raw),
        })
    }

    fn observe(&mut self, y: bool) -> Result<()> {
        let atoms = self
            .pending
            .take()
            .ok_or_else(|| Error::Contract("observe called before next_distribution".into()))?;
        let yf = f64::from(y);
        let mut losses = vec![0.0f64; 2 * self.partition.len()];
        for a in &atoms {
            let d = a.prob * (a.value - yf);
            losses[2 * a.interval] += d;
            losses[2 * a.interval + 1] -= d;
        }
        self.msmwc.update(&losses)
    }

    fn diagnostics(&self) -> Vec<(&'static str, f64)> {
        vec![("phi_imbalance_max", self.phi_imbalance_max)]
    }
}

/// Grid size for the uniform-partition forecaster:
/// `N = ceil(min{ sqrt(T / (iota ln T)), cbrt(T^2 / (iota (1+C) ln T)) })`.
pub fn eq3_grid_size(horizon: usize, c_guess: f64, iota: f64) -> usize {
    let t = horizon.max(2) as f64;
    let lt = t.ln();
    let stationary = (t / (iota * lt)).sqrt();
    let adversarial = (t * t / (iota * (1.0 + c_guess) * lt)).cbrt();
    (stationary.min(adversarial).ceil() as usize).max(1)
}

/// The forecaster over a uniform partition with the adaptive grid size.
pub fn hu_uniform(
    horizon: usize,
    c_guess: f64,
    iota: f64,
    rng: ChaCha8Rng,
) -> Result<HuForecaster> {
    let n = eq3_grid_size(horizon, c_guess, iota);
    let partition = crate::partition::unif_part(crate::partition::Interval::closed(0.0, 1.0), n)?;
    HuForecaster::new(partition, horizon, rng)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::partition::{unif_part, Interval};
    use rand::SeedableRng;

    fn uniform(n: usize) -> Partition {
        unif_part(Interval::closed(0.0, 1.0), n).unwrap()
    }

    #[test]
    fn nonpositive_potential_at_zero_puts_all_mass_on_zero() {
        let p = uniform(4);
        let atoms = phi_two_point(&p, &[-0.2, 0.1, 0.3, 0.4], 16);
        assert_eq!(atoms.len(), 1);
        assert_eq!((atoms[0].value, atoms[0].prob, atoms[0].interval), (0.0, 1.0, 0));
        // exactly zero at 0 counts as the low boundary case
        let atoms = phi_two_point(&p, &[0.0, 0.1, 0.3, 0.4], 16);
        assert_eq!((atoms[0].value, atoms[0].prob), (0.0, 1.0));
    }

    #[test]
    fn positive_potential_everywhere_puts_all_mass_on_one() {
        let p = uniform(4);
        let atoms = phi_two_point(&p, &[0.2, 0.1, 0.3, 0.4], 16);
        assert_eq!(atoms.len(), 1);
        assert_eq!((atoms[0].value, atoms[0].prob, atoms[0].interval), (1.0, 1.0, 3));
    }

    #[test]
    fn interior_bracket_mixes_inversely_to_magnitudes() {
        // phi = +0.5 on [0, 0.5), -0.25 on [0.5, 1]; bracket at (7/16, 8/16)
        let p = uniform(2);
        let atoms = phi_two_point(&p, &[0.5, -0.25], 16);
        assert_eq!(atoms.len(), 2);
        assert_eq!(atoms[0].value, 7.0 / 16.0);
        assert_eq!(atoms[1].value, 0.5);
        // mass inversely proportional to |phi|: probabilities (1/3, 2/3)
        assert!((atoms[0].prob - 1.0 / 3.0).abs() < 1e-15);
        assert!((atoms[1].prob - 2.0 / 3.0).abs() < 1e-15);
        // expectation of phi vanishes
        let e = atoms[0].prob * 0.5 + atoms[1].prob * -0.25;
        assert!(e.abs() <= 1e-12);
    }

    #[test]
    fn zero_valued_bracket_point_takes_all_the_mass() {
        let p = uniform(4);
        let atoms = phi_two_point(&p, &[0.5, 0.0, -0.3, -0.4], 16);
        assert_eq!(atoms.len(), 1);
        // the zero-valued grid point 4/16 (first point of interval 1)
        assert_eq!((atoms[0].value, atoms[0].prob, atoms[0].interval), (0.25, 1.0, 1));
    }

    #[test]
    fn matches_literal_grid_scan_on_random_inputs() {
        use rand::Rng;
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for trial in 0..500 {
            let n = rng.random_range(1..12usize);
            let t = rng.random_range(4..40usize);
            let p = if trial % 3 == 0 {
                crate::partition::build_nonuniform_cal(
                    rng.random_range(0.0..1.0),
                    rng.random_range(0.01..0.3),
                    rng.random_range(1..4usize),
                    rng.random_range(1..3usize),
                    12,
                )
            } else {
                uniform(n)
            };
            let vals: Vec<f64> = (0..p.len())
                .map(|_| {
                    let v: f64 = rng.random_range(-1.0..1.0);
                    if rng.random_bool(0.15) {
                        0.0
                    } else {
                        v
                    }
                })
                .collect();
            let fast = phi_two_point(&p, &vals, t);

            // literal scan
            let phi_at = |x: f64| vals[p.locate(x).unwrap()];
            let expected: Vec<RawAtom> = if phi_at(0.0) <= 0.0 {
                vec![RawAtom { value: 0.0, prob: 1.0, interval: p.locate(0.0).unwrap() }]
            } else if phi_at(1.0) > 0.0 {
                vec![RawAtom { value: 1.0, prob: 1.0, interval: p.locate(1.0).unwrap() }]
            } else {
                let mut found = None;
                for i in 0..t {
                    let a = i as f64 / t as f64;
                    let b = (i + 1) as f64 / t as f64;
                    if phi_at(a) * phi_at(b) <= 0.0 {
                        found = Some((i, a, b));
                        break;
                    }
                }
                let (i, a, b) = found.expect("bracket must exist");
                let (va, vb) = (phi_at(a), phi_at(b));
                let s = va.abs() + vb.abs();
                if s == 0.0 {
                    vec![RawAtom { value: a, prob: 1.0, interval: p.locate(a).unwrap() }]
                } else {
                    let mut out = Vec::new();
                    if vb.abs() > 0.0 {
                        out.push(RawAtom { value: a, prob: vb.abs() / s, interval: p.locate(a).unwrap() });
                    }
                    if va.abs() > 0.0 {
                        out.push(RawAtom { value: b, prob: va.abs() / s, interval: p.locate(b).unwrap() });
                    }
                    let _ = i;
                    out
                }
            };
            assert_eq!(fast.len(), expected.len(), "trial {trial}");
            for (f, e) in fast.iter().zip(&expected) {
                assert_eq!(f.value, e.value, "trial {trial}");
                assert_eq!(f.interval, e.interval, "trial {trial}");
                assert!((f.prob - e.prob).abs() < 1e-15, "trial {trial}");
            }
        }
    }

    #[test]
    fn eq3_grid_size_examples() {
        // T = 4096, iota = 8, C = 0: sqrt branch = 7.84..., ceil = 8
        assert_eq!(eq3_grid_size(4096, 0.0, 8.0), 8);
        // huge C pushes the cbrt branch below the sqrt branch
        let t = 4096;
        let with_c = eq3_grid_size(t, t as f64, 8.0);
        assert!(with_c < eq3_grid_size(t, 0.0, 8.0));
        // ceiling keeps N >= 1
        assert_eq!(eq3_grid_size(4, 1e12, 1e9), 1);
    }

    #[test]
    fn emitted_atoms_live_on_the_grid_and_losses_stay_bounded() {
        let mut fc = HuForecaster::new(uniform(5), 64, ChaCha8Rng::seed_from_u64(2)).unwrap();
        let grid = fc.partition().grid();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for t in 0..200 {
            use rand::Rng;
            let rp = fc.next_distribution().unwrap();
            rp.dist.validate().unwrap();
            for &(a, _) in rp.dist.atoms() {
                assert!(grid.contains(&a), "round {t}: atom {a} off-grid");
            }
            assert!(rp.dist.prob_of(rp.prediction) > 0.0);
            fc.observe(rng.random_bool(0.4)).unwrap();
        }
        assert!(fc.phi_imbalance_max() <= 1e-12);
    }

    #[test]
    fn rejects_partitions_that_do_not_cover_the_unit_interval() {
        let p = unif_part(Interval::closed(0.2, 0.8), 3).unwrap();
        assert!(HuForecaster::new(p, 16, ChaCha8Rng::seed_from_u64(0)).is_err());
    }
}
