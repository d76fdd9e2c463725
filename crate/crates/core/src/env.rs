//! Synthetic environments: mean sequences `{q_t}` with controlled
//! non-stationarity and Bernoulli outcome streams drawn from them.
//!
//! Reproducibility: all randomness flows through ChaCha8 streams whose seeds
//! are derived with SplitMix64 from a `(seed, stream)` pair, so replay is
//! bit-exact across platforms. The full mean sequence is fixed before any
//! outcome is drawn (an oblivious adversary).

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::metrics::{nonstationarity_c, segment_count_k, EnvTrace};

/// SplitMix64 mix of a base seed and a stream index; the standard counter
/// construction for carving independent substreams out of one seed.
pub fn substream_seed(seed: u64, stream: u64) -> u64 {
    let mut z = seed.wrapping_add(stream.wrapping_mul(0x9e3779b97f4a7c15));
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
    z ^ (z >> 31)
}

/// Deterministic RNG for substream `stream` of `seed`.
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(substream_seed(seed, stream))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DriftShape {
    Linear,
    /// Half-cosine ramp from `start` to `end`.
    Sinusoidal,
}

/// How the mean sequence is generated.
#[derive(Debug, Clone, PartialEq)]
pub enum EnvKind {
    Iid { q: f64 },
    Piecewise { segments: Vec<(usize, f64)> },
    Drift { start: f64, end: f64, shape: DriftShape },
    Scripted { means: Vec<f64> },
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnvSpec {
    pub kind: EnvKind,
    pub horizon: usize,
}

/// A generated environment: the mean trace and the realized outcomes.
#[derive(Debug, Clone)]
pub struct EnvStream {
    pub trace: EnvTrace,
    pub outcomes: Vec<bool>,
}

fn check_unit(field: &str, v: f64) -> Result<()> {
    if (0.0..=1.0).contains(&v) {
        Ok(())
    } else {
        Err(Error::config(field, format!("{v} outside [0, 1]")))
    }
}

impl EnvSpec {
    pub fn validate(&self) -> Result<()> {
        if self.horizon == 0 {
            return Err(Error::config("horizon", "must be positive"));
        }
        match &self.kind {
            EnvKind::Iid { q } => check_unit("q", *q),
            EnvKind::Piecewise { segments } => {
                if segments.is_empty() {
                    return Err(Error::config("segment", "piecewise needs segments"));
                }
                for &(len, q) in segments {
                    if len == 0 {
                        return Err(Error::config("segment", "zero-length segment"));
                    }
                    check_unit("segment", q)?;
                }
                let total: usize = segments.iter().map(|s| s.0).sum();
                if total != self.horizon {
                    return Err(Error::config(
                        "segment",
                        format!("segment lengths sum to {total}, horizon is {}", self.horizon),
                    ));
                }
                Ok(())
            }
            EnvKind::Drift { start, end, .. } => {
                check_unit("start", *start)?;
                check_unit("end", *end)
            }
            EnvKind::Scripted { means } => {
                if means.len() != self.horizon {
                    return Err(Error::config(
                        "values",
                        format!("{} values for horizon {}", means.len(), self.horizon),
                    ));
                }
                for &q in means {
                    check_unit("values", q)?;
                }
                Ok(())
            }
        }
    }

    /// The deterministic mean sequence.
    pub fn means(&self) -> Result<Vec<f64>> {
        self.validate()?;
        let t = self.horizon;
        Ok(match &self.kind {
            EnvKind::Iid { q } => vec![*q; t],
            EnvKind::Piecewise { segments } => {
                let mut out = Vec::with_capacity(t);
                for &(len, q) in segments {
                    out.extend(std::iter::repeat(q).take(len));
                }
                out
            }
            EnvKind::Drift { start, end, shape } => (0..t)
                .map(|i| {
                    let frac = if t == 1 {
                        0.0
                    } else {
                        i as f64 / (t - 1) as f64
                    };
                    let ramp = match shape {
                        DriftShape::Linear => frac,
                        DriftShape::Sinusoidal => 0.5 * (1.0 - (std::f64::consts::PI * frac).cos()),
                    };
                    start + (end - start) * ramp
                })
                .collect(),
            EnvKind::Scripted { means } => means.clone(),
        })
    }

    /// Compact label used in report rows.
    pub fn label(&self) -> String {
        match &self.kind {
            EnvKind::Iid { q } => format!("iid(q={q})"),
            EnvKind::Piecewise { segments } => {
                let parts: Vec<String> = segments
                    .iter()
                    .map(|(len, q)| format!("{len}x{q}"))
                    .collect();
                format!("piecewise({})", parts.join(","))
            }
            EnvKind::Drift { start, end, shape } => {
                let s = match shape {
                    DriftShape::Linear => "linear",
                    DriftShape::Sinusoidal => "sin",
                };
                format!("drift({start}->{end},{s})")
            }
            EnvKind::Scripted { means } => format!("scripted(len={})", means.len()),
        }
    }
}

/// Generates the mean trace and draws `y_t ~ Ber(q_t)` from the seeded
/// stream. Same `(spec, seed)` always yields the identical outcome stream.
pub fn generate(spec: &EnvSpec, seed: u64) -> Result<EnvStream> {
    let means = spec.means()?;
    let mut rng = stream_rng(seed, 0);
    let outcomes = means.iter().map(|&q| rng.random::<f64>() < q).collect();
    Ok(EnvStream {
        trace: EnvTrace::new(means),
        outcomes,
    })
}

/// Ground-truth non-stationarity of the spec: `(C, K, p*)`.
pub fn ground_truth(spec: &EnvSpec) -> Result<(f64, usize, f64)> {
    let trace = EnvTrace::new(spec.means()?);
    let (c, p_star) = nonstationarity_c(&trace);
    let k = segment_count_k(&trace);
    Ok((c, k, p_star))
}
