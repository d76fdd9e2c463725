//! Block/sub-block restart framework: adapts any certificate-satisfying base
//! forecaster to an unknown non-stationarity level and piecewise-stationary
//! environments. Each block runs a batch of stationarity-test sub-blocks
//! (guess 0, moving threshold) followed by one doubling-guess sub-block with
//! a fixed threshold; a sub-block ends the first round its running error
//! exceeds its threshold.

use std::collections::BTreeMap;

use crate::env::{substream_seed, EnvStream};
use crate::error::{Error, Result};
use crate::forecasters::Forecaster;
use crate::metrics::{kl_bernoulli, MetricKind, RoundRecord, Transcript};

/// Which error family a certificate budgets for.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CertFamily {
    Cal1,
    Cal2,
    Pkl,
}

impl CertFamily {
    pub fn metric(self) -> MetricKind {
        match self {
            CertFamily::Cal1 => MetricKind::Cal1,
            CertFamily::Cal2 => MetricKind::Cal2,
            CertFamily::Pkl => MetricKind::PseudoKl,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            CertFamily::Cal1 => "cal1",
            CertFamily::Cal2 => "cal2",
            CertFamily::Pkl => "pkl",
        }
    }
}

/// Parametric error budget `U(I, C~)` promised by a base forecaster run
/// afresh on interval `I` under non-stationarity guess `C~`:
///
/// - cal1: `alpha1 sqrt(|I|) + alpha2 cbrt(C~ |I|)`
/// - cal2: `alpha1 + alpha2 cbrt(C~)`
/// - pkl:  `h + alpha1 + alpha2 cbrt(C~)`
///
/// Non-decreasing in both arguments by construction.
#[derive(Debug, Clone, Copy)]
pub struct CertificateFn {
    pub family: CertFamily,
    pub alpha1: f64,
    pub alpha2: f64,
    pub h: f64,
}

impl CertificateFn {
    /// Default constants, polynomial in `ln T` and `iota`, scaled by a single
    /// multiplier. These are empirical budgets; the harness exposes `scale`.
    pub fn defaults(family: CertFamily, horizon: usize, iota: f64, scale: f64) -> Self {
        let ln_t = (horizon.max(2) as f64).ln();
        match family {
            CertFamily::Cal1 => CertificateFn {
                family,
                alpha1: scale * iota.sqrt() * ln_t,
                alpha2: scale * (iota * ln_t).cbrt(),
                h: 0.0,
            },
            CertFamily::Cal2 => CertificateFn {
                family,
                alpha1: scale * iota * ln_t * ln_t,
                alpha2: scale * iota.powf(2.0 / 3.0) * ln_t * ln_t,
                h: 0.0,
            },
            CertFamily::Pkl => CertificateFn {
                family,
                alpha1: scale * iota * ln_t * ln_t,
                alpha2: scale * iota.powf(2.0 / 3.0) * ln_t * ln_t,
                h: ((horizon as f64) + 1.0).ln(),
            },
        }
    }

    pub fn eval(&self, len: usize, c_tilde: f64) -> f64 {
        let l = len as f64;
        match self.family {
            CertFamily::Cal1 => self.alpha1 * l.sqrt() + self.alpha2 * (c_tilde * l).cbrt(),
            CertFamily::Cal2 => self.alpha1 + self.alpha2 * c_tilde.cbrt(),
            CertFamily::Pkl => self.h + self.alpha1 + self.alpha2 * c_tilde.cbrt(),
        }
    }
}

/// Union-bound confidence split: `delta / (10 T^2 ceil(log8(8 + T)))`.
pub fn delta_prime(delta: f64, horizon: usize) -> f64 {
    let t = horizon as f64;
    delta / (10.0 * t * t * ((8.0 + t).ln() / 8f64.ln()).ceil())
}

/// Largest block index with a distinct guess; guesses cap at `2^(3 b_max)`.
pub fn guess_cap_exponent(horizon: usize) -> u32 {
    ((8.0 + horizon as f64).ln() / 8f64.ln()).ceil() as u32
}

/// The doubling guess for block `b`, capped at the union bound's guess set.
pub fn block_guess(b: u32, horizon: usize) -> f64 {
    2f64.powi(3 * b.min(guess_cap_exponent(horizon)) as i32)
}

/// Stationarity-test sub-blocks per block: the budget ratio, squared for the
/// cal1 family, plain for cal2/pkl, rounded up.
pub fn g_b(cert: &CertificateFn, b: u32, horizon: usize) -> u64 {
    let ratio = cert.eval(horizon, block_guess(b, horizon)) / cert.eval(horizon, 0.0);
    let v = match cert.family {
        CertFamily::Cal1 => (ratio * ratio).ceil(),
        _ => ratio.ceil(),
    };
    v as u64
}

/// Incrementally maintained calibration error of a growing round window.
/// Restarting the window restarts all per-prediction groupings.
#[derive(Debug, Clone)]
pub struct RunningError {
    kind: MetricKind,
    /// per-prediction or per-atom (mass, hits); mass counts rounds for the
    /// realized metrics and sums probabilities for the pseudo metrics
    groups: BTreeMap<u64, (f64, f64)>,
    finite_total: f64,
    infinite_atoms: usize,
}

impl RunningError {
    pub fn new(kind: MetricKind) -> Self {
        RunningError {
            kind,
            groups: BTreeMap::new(),
            finite_total: 0.0,
            infinite_atoms: 0,
        }
    }

    pub fn total(&self) -> f64 {
        if self.infinite_atoms > 0 {
            f64::INFINITY
        } else {
            self.finite_total
        }
    }

    fn contrib(kind: MetricKind, value: f64, mass: f64, hits: f64) -> f64 {
        if mass <= 0.0 {
            return 0.0;
        }
        let rho = hits / mass;
        match kind {
            MetricKind::Cal1 => mass * (rho - value).abs(),
            MetricKind::Cal2 | MetricKind::PseudoCal2 => mass * (rho - value) * (rho - value),
            MetricKind::PseudoKl => mass * kl_bernoulli(rho, value),
        }
    }

    fn apply(&mut self, value: f64, weight: f64, y: f64) {
        let e = self.groups.entry(value.to_bits()).or_insert((0.0, 0.0));
        let old = Self::contrib(self.kind, value, e.0, e.1);
        e.0 += weight;
        e.1 += weight * y;
        let new = Self::contrib(self.kind, value, e.0, e.1);
        if old.is_infinite() {
            self.infinite_atoms -= 1;
        } else {
            self.finite_total -= old;
        }
        if new.is_infinite() {
            self.infinite_atoms += 1;
        } else {
            self.finite_total += new;
        }
    }

    pub fn push(&mut self, record: &RoundRecord) {
        let y = f64::from(record.y);
        match self.kind {
            MetricKind::Cal1 | MetricKind::Cal2 => self.apply(record.p, 1.0, y),
            MetricKind::PseudoCal2 | MetricKind::PseudoKl => {
                for &(a, w) in record.dist.atoms() {
                    self.apply(a, w, y);
                }
            }
        }
    }
}

/// One sub-block of the restart schedule (1-based inclusive round span).
#[derive(Debug, Clone)]
pub struct MetaLogRow {
    pub block: u32,
    pub sub_block: u64,
    pub guess: f64,
    pub start: usize,
    pub end: usize,
    pub err: f64,
    pub terminated_early: bool,
}

/// Restart log; sub-blocks tile the horizon in order.
#[derive(Debug, Clone, Default)]
pub struct MetaLog {
    pub rows: Vec<MetaLogRow>,
}

impl MetaLog {
    /// Number of stationarity-test sub-blocks that tripped their threshold.
    pub fn early_terminated_tests(&self) -> usize {
        self.rows
            .iter()
            .filter(|r| r.terminated_early && r.guess == 0.0)
            .count()
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("b,l,guess,start,end,err,terminated_early\n");
        for r in &self.rows {
            out.push_str(&format!(
                "{},{},{},{},{},{},{}\n",
                r.block, r.sub_block, r.guess, r.start, r.end, r.err, r.terminated_early
            ));
        }
        out
    }
}

/// A fresh base forecaster for `(confidence, guess, seed)`.
pub type MetaBaseFactory<'a> = dyn FnMut(f64, f64, u64) -> Result<Box<dyn Forecaster>> + 'a;

/// Runs the restart framework over a pre-drawn environment stream.
///
/// Blocks `b = 1, 2, ...` each run `G_b` stationarity tests (guess 0; the
/// threshold is the stationary budget of the rounds seen so far, recomputed
/// every round) and then one sub-block with guess `2^{3b}` and the fixed
/// horizon-level threshold. The error driving termination is the
/// certificate's own metric on the sub-block's rounds.
pub fn run_meta(
    factory: &mut MetaBaseFactory,
    cert: &CertificateFn,
    delta: f64,
    stream: &EnvStream,
    seed: u64,
) -> Result<(Transcript, MetaLog)> {
    let horizon = stream.outcomes.len();
    let dprime = delta_prime(delta, horizon);
    let kind = cert.family.metric();
    let mut transcript = Transcript::new();
    let mut log = MetaLog::default();
    let mut t = 0usize; // rounds completed
    let mut restarts = 0u64;

    'outer: for b in 1u32.. {
        let tests = g_b(cert, b, horizon);
        for l in 1..=tests + 1 {
            let is_test = l <= tests;
            let guess = if is_test {
                0.0
            } else {
                block_guess(b, horizon)
            };
            restarts += 1;
            let mut base = factory(dprime, guess, substream_seed(seed, restarts))?;
            let start = t;
            let mut err = RunningError::new(kind);
            let mut threshold = if is_test {
                0.0
            } else {
                cert.eval(horizon, guess)
            };
            let mut early = false;
            loop {
                if err.total() > threshold {
                    early = true;
                    break;
                }
                if t == horizon {
                    break;
                }
                let rp = base.next_distribution()?;
                rp.dist.validate().map_err(|e| {
                    Error::Contract(format!("round {}: {e}", t + 1))
                })?;
                let record = RoundRecord {
                    q: Some(stream.trace.means()[t]),
                    y: stream.outcomes[t],
                    dist: rp.dist,
                    p: rp.prediction,
                    raw_dist: rp.raw_dist,
                };
                record.validate()?;
                base.observe(record.y)?;
                err.push(&record);
                transcript.push(record);
                t += 1;
                if is_test {
                    threshold = cert.eval(t - start, 0.0);
                }
            }
            log.rows.push(MetaLogRow {
                block: b,
                sub_block: l,
                guess,
                start: start + 1,
                end: t,
                err: err.total(),
                terminated_early: early,
            });
            if t == horizon {
                break 'outer;
            }
        }
    }
    Ok((transcript, log))
}
