//! Calibration measures computed from transcripts and non-stationarity
//! measures computed from environment traces.
//!
//! Predictions are grouped by exact bit-equality: forecasters only emit grid
//! points, so no fuzzy binning is needed. Per-group accumulators live in
//! `BTreeMap`s keyed by the bit pattern of the (nonnegative) value, which
//! makes every sum deterministic.

use std::collections::BTreeMap;
use std::fmt;
use std::ops::Range;

use crate::dist::PredictionDistribution;
use crate::error::{Error, Result};

/// One round of play: environment mean (if known), realized outcome, the
/// forecaster's prediction distribution, and the sampled prediction.
#[derive(Debug, Clone)]
pub struct RoundRecord {
    /// Environment mean `q_t`; absent for transcripts of real data.
    pub q: Option<f64>,
    pub y: bool,
    pub dist: PredictionDistribution,
    /// Sampled prediction; must be an atom of `dist`.
    pub p: f64,
    /// Pre-rounding distribution, when the algorithm has one (diagnostics
    /// only; not serialized and ignored by every metric).
    pub raw_dist: Option<PredictionDistribution>,
}

impl RoundRecord {
    pub fn validate(&self) -> Result<()> {
        self.dist.validate()?;
        if self.dist.prob_of(self.p) <= 0.0 {
            return Err(Error::Contract(format!(
                "sampled prediction {} is not an atom of the emitted distribution",
                self.p
            )));
        }
        if let Some(q) = self.q {
            if !(0.0..=1.0).contains(&q) {
                return Err(Error::Contract(format!("environment mean {q} outside [0, 1]")));
            }
        }
        Ok(())
    }
}

/// Per-round records for a full run.
#[derive(Debug, Clone, Default)]
pub struct Transcript {
    rounds: Vec<RoundRecord>,
}

impl Transcript {
    pub fn new() -> Self {
        Transcript { rounds: Vec::new() }
    }

    pub fn push(&mut self, record: RoundRecord) {
        self.rounds.push(record);
    }

    pub fn rounds(&self) -> &[RoundRecord] {
        &self.rounds
    }

    pub fn horizon(&self) -> usize {
        self.rounds.len()
    }

    /// One round per line: `t q y p k a1 w1 ... ak wk` (`q` is `nan` when
    /// absent; `t` is 1-based).
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for (t, r) in self.rounds.iter().enumerate() {
            out.push_str(&format!(
                "{} {:?} {} {:?} {}",
                t + 1,
                r.q.unwrap_or(f64::NAN),
                u8::from(r.y),
                r.p,
                r.dist.atoms().len()
            ));
            for &(a, w) in r.dist.atoms() {
                out.push_str(&format!(" {a:?} {w:?}"));
            }
            out.push('\n');
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut rounds = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let bad = |msg: &str| {
                Error::InvalidArgument(format!("transcript line {}: {msg}", lineno + 1))
            };
            let fields: Vec<&str> = line.split_whitespace().collect();
            if fields.len() < 5 {
                return Err(bad("expected at least 5 fields"));
            }
            let q: f64 = fields[1].parse().map_err(|_| bad("bad q"))?;
            let y: u8 = fields[2].parse().map_err(|_| bad("bad y"))?;
            let p: f64 = fields[3].parse().map_err(|_| bad("bad p"))?;
            let k: usize = fields[4].parse().map_err(|_| bad("bad atom count"))?;
            if fields.len() != 5 + 2 * k {
                return Err(bad("atom count does not match field count"));
            }
            let mut atoms = Vec::with_capacity(k);
            for i in 0..k {
                let a: f64 = fields[5 + 2 * i].parse().map_err(|_| bad("bad atom"))?;
                let w: f64 = fields[6 + 2 * i].parse().map_err(|_| bad("bad weight"))?;
                atoms.push((a, w));
            }
            let record = RoundRecord {
                q: if q.is_nan() { None } else { Some(q) },
                y: y != 0,
                dist: PredictionDistribution::from_atoms(atoms)?,
                p,
                raw_dist: None,
            };
            record.validate()?;
            rounds.push(record);
        }
        Ok(Transcript { rounds })
    }
}

/// Environment mean sequence `{q_t}`.
#[derive(Debug, Clone)]
pub struct EnvTrace {
    means: Vec<f64>,
}

impl EnvTrace {
    pub fn new(means: Vec<f64>) -> Self {
        EnvTrace { means }
    }

    pub fn means(&self) -> &[f64] {
        &self.means
    }

    pub fn len(&self) -> usize {
        self.means.len()
    }

    pub fn is_empty(&self) -> bool {
        self.means.is_empty()
    }

    /// One mean per line.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for q in &self.means {
            out.push_str(&format!("{q:?}\n"));
        }
        out
    }
}

/// Which calibration measure to compute.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MetricKind {
    Cal1,
    Cal2,
    PseudoCal2,
    PseudoKl,
}

impl MetricKind {
    pub const ALL: [MetricKind; 4] = [
        MetricKind::Cal1,
        MetricKind::Cal2,
        MetricKind::PseudoCal2,
        MetricKind::PseudoKl,
    ];

    pub fn name(self) -> &'static str {
        match self {
            MetricKind::Cal1 => "cal1",
            MetricKind::Cal2 => "cal2",
            MetricKind::PseudoCal2 => "pcal2",
            MetricKind::PseudoKl => "pkl",
        }
    }
}

impl fmt::Display for MetricKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// KL divergence between Bernoulli means, with the conventions
/// `0 log 0 = 0` and `KL(q, p) = +inf` when `p` is degenerate and `q != p`.
pub fn kl_bernoulli(q: f64, p: f64) -> f64 {
    let term = |num: f64, den: f64| -> f64 {
        if num == 0.0 {
            0.0
        } else if den == 0.0 {
            f64::INFINITY
        } else {
            num * (num / den).ln()
        }
    };
    term(q, p) + term(1.0 - q, 1.0 - p)
}

/// Per-prediction hit and visit counts; the empirical mean of group `p` is
/// `hits / n`. The pseudo metrics use the same shape with fractional masses,
/// so point-mass transcripts take bit-identical float paths through both.
fn prediction_groups(rounds: &[RoundRecord]) -> BTreeMap<u64, (f64, f64)> {
    let mut groups: BTreeMap<u64, (f64, f64)> = BTreeMap::new();
    for r in rounds {
        let e = groups.entry(r.p.to_bits()).or_insert((0.0, 0.0));
        e.0 += 1.0;
        e.1 += f64::from(r.y);
    }
    groups
}

fn cal_l1_rounds(rounds: &[RoundRecord]) -> f64 {
    prediction_groups(rounds)
        .iter()
        .map(|(&bits, &(n, hits))| {
            let p = f64::from_bits(bits);
            n * (hits / n - p).abs()
        })
        .sum()
}

fn cal_l2_rounds(rounds: &[RoundRecord]) -> f64 {
    prediction_groups(rounds)
        .iter()
        .map(|(&bits, &(n, hits))| {
            let p = f64::from_bits(bits);
            let d = hits / n - p;
            n * d * d
        })
        .sum()
}

/// Per-atom weighted mass and hit totals for the pseudo metrics.
fn pseudo_groups(rounds: &[RoundRecord]) -> BTreeMap<u64, (f64, f64)> {
    let mut groups: BTreeMap<u64, (f64, f64)> = BTreeMap::new();
    for r in rounds {
        let y = if r.y { 1.0 } else { 0.0 };
        for &(a, w) in r.dist.atoms() {
            let e = groups.entry(a.to_bits()).or_insert((0.0, 0.0));
            e.0 += w;
            e.1 += w * y;
        }
    }
    groups
}

fn pseudo_cal_l2_rounds(rounds: &[RoundRecord]) -> f64 {
    pseudo_groups(rounds)
        .iter()
        .filter(|(_, &(mass, _))| mass > 0.0)
        .map(|(&bits, &(mass, hits))| {
            let a = f64::from_bits(bits);
            let rho = hits / mass;
            mass * (rho - a) * (rho - a)
        })
        .sum()
}

fn pseudo_kl_rounds(rounds: &[RoundRecord]) -> f64 {
    pseudo_groups(rounds)
        .iter()
        .filter(|(_, &(mass, _))| mass > 0.0)
        .map(|(&bits, &(mass, hits))| {
            let a = f64::from_bits(bits);
            mass * kl_bernoulli(hits / mass, a)
        })
        .sum()
}

/// `Cal_1`: summed absolute deviation between each predicted value and the
/// empirical outcome mean over the rounds where it was predicted.
pub fn cal_l1(t: &Transcript) -> f64 {
    cal_l1_rounds(&t.rounds)
}

/// `Cal_2`: squared deviations weighted by the visit counts.
pub fn cal_l2(t: &Transcript) -> f64 {
    cal_l2_rounds(&t.rounds)
}

/// Pseudo `Cal_2`: replaces visit counts with expected per-round prediction
/// probabilities.
pub fn pseudo_cal_l2(t: &Transcript) -> f64 {
    pseudo_cal_l2_rounds(&t.rounds)
}

/// Pseudo KL calibration. Returns `+inf` if some atom sits at 0 or 1 while
/// its weighted outcome mean differs, which signals a forecaster violating
/// its clipping contract.
pub fn pseudo_kl(t: &Transcript) -> f64 {
    pseudo_kl_rounds(&t.rounds)
}

/// The chosen metric on a contiguous round range, with all groupings
/// restarted within the range. Empty ranges yield 0.
pub fn interval_metric(t: &Transcript, range: Range<usize>, kind: MetricKind) -> f64 {
    let rounds = &t.rounds[range];
    if rounds.is_empty() {
        return 0.0;
    }
    match kind {
        MetricKind::Cal1 => cal_l1_rounds(rounds),
        MetricKind::Cal2 => cal_l2_rounds(rounds),
        MetricKind::PseudoCal2 => pseudo_cal_l2_rounds(rounds),
        MetricKind::PseudoKl => pseudo_kl_rounds(rounds),
    }
}

/// Minimal total absolute deviation of the mean sequence and the minimizing
/// constant: `p*` is the lower median (sorted element at index
/// `floor((T-1)/2)`), `C = sum |q_t - p*|`.
pub fn nonstationarity_c(env: &EnvTrace) -> (f64, f64) {
    assert!(!env.is_empty(), "nonstationarity_c needs a nonempty trace");
    let mut sorted = env.means.clone();
    sorted.sort_by(f64::total_cmp);
    let p_star = sorted[(sorted.len() - 1) / 2];
    let c = env.means.iter().map(|q| (q - p_star).abs()).sum();
    (c, p_star)
}

/// Number of maximal constant runs of the mean sequence.
pub fn segment_count_k(env: &EnvTrace) -> usize {
    assert!(!env.is_empty(), "segment_count_k needs a nonempty trace");
    1 + env.means.windows(2).filter(|w| w[0] != w[1]).count()
}

/// Corruption mass routed to one grid point: `sum_t |q_t - p*| P_t(z)`.
pub fn per_grid_corruption(t: &Transcript, env: &EnvTrace, grid_point: f64) -> f64 {
    assert_eq!(
        t.horizon(),
        env.len(),
        "transcript and environment trace must be aligned"
    );
    let (_, p_star) = nonstationarity_c(env);
    t.rounds
        .iter()
        .zip(env.means())
        .map(|(r, q)| (q - p_star).abs() * r.dist.prob_of(grid_point))
        .sum()
}
