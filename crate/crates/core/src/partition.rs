//! Interval geometry: uniform partitions, the epoch frameworks' non-uniform
//! inner/outer partitions, and point-location queries.
//!
//! A [`Partition`] tiles its domain exactly: every interval is left-closed and
//! right-open except the last, which is closed. Adjacent intervals share the
//! same floating-point endpoint, so disjointness and coverage hold under exact
//! comparison. Builders compute each subinterval endpoint as `lo + k * width`
//! and assign the final endpoint exactly, avoiding cumulative drift.

use crate::error::{Error, Result};
use crate::transform::theta;

/// A subinterval of `[0, pi]`. The left endpoint is always inclusive; the
/// right endpoint is inclusive iff `right_closed`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
    pub right_closed: bool,
}

impl Interval {
    pub fn new(lo: f64, hi: f64, right_closed: bool) -> Self {
        assert!(lo <= hi, "interval endpoints out of order: [{lo}, {hi}]");
        Interval {
            lo,
            hi,
            right_closed,
        }
    }

    /// Closed interval `[lo, hi]`.
    pub fn closed(lo: f64, hi: f64) -> Self {
        Interval::new(lo, hi, true)
    }

    /// Half-open interval `[lo, hi)`.
    pub fn half_open(lo: f64, hi: f64) -> Self {
        Interval::new(lo, hi, false)
    }

    /// Empty iff `lo == hi` and the right endpoint is excluded.
    pub fn is_empty(&self) -> bool {
        self.lo == self.hi && !self.right_closed
    }

    /// Width `hi - lo` (the diameter of the closure).
    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn contains(&self, x: f64) -> bool {
        x >= self.lo && (x < self.hi || (self.right_closed && x == self.hi))
    }

    /// Distance from `p` to the closure of the interval.
    pub fn distance_to(&self, p: f64) -> f64 {
        if p < self.lo {
            self.lo - p
        } else if p > self.hi {
            p - self.hi
        } else {
            0.0
        }
    }
}

/// Per-interval widths and (optionally) distances to an anchor point.
#[derive(Debug, Clone)]
pub struct PartitionGeometry {
    pub widths: Vec<f64>,
    pub anchor: Option<f64>,
    /// `dist[i] = inf_{u in J_i} |anchor - u|`; empty when no anchor is set.
    pub distances: Vec<f64>,
}

/// An ordered tiling of a domain interval by pairwise-disjoint intervals.
///
/// The grid prediction of interval `J` is `sup J = J.hi`.
#[derive(Debug, Clone, PartialEq)]
pub struct Partition {
    intervals: Vec<Interval>,
    domain: Interval,
}

impl Partition {
    /// Builds a partition from strictly increasing cut points. Interval `i`
    /// is `[cuts[i], cuts[i+1])`, except the last, which is closed.
    fn from_cuts(cuts: Vec<f64>) -> Self {
        assert!(cuts.len() >= 2, "need at least two cut points");
        let n = cuts.len() - 1;
        let mut intervals = Vec::with_capacity(n);
        for i in 0..n {
            assert!(cuts[i] < cuts[i + 1], "cut points must strictly increase");
            intervals.push(Interval::new(cuts[i], cuts[i + 1], i + 1 == n));
        }
        Partition {
            intervals,
            domain: Interval::closed(cuts[0], cuts[n]),
        }
    }

    pub fn intervals(&self) -> &[Interval] {
        &self.intervals
    }

    pub fn len(&self) -> usize {
        self.intervals.len()
    }

    pub fn is_empty(&self) -> bool {
        self.intervals.is_empty()
    }

    pub fn domain(&self) -> Interval {
        self.domain
    }

    /// Grid prediction `z_J = sup J` of interval `i`.
    pub fn grid_point(&self, i: usize) -> f64 {
        self.intervals[i].hi
    }

    /// All grid predictions, in interval order.
    pub fn grid(&self) -> Vec<f64> {
        self.intervals.iter().map(|j| j.hi).collect()
    }

    /// Sorted distinct interval endpoints. Adjacent intervals share their
    /// boundary exactly, so this is `{lo_0, hi_0, hi_1, ...}`.
    pub fn endpoints(&self) -> Vec<f64> {
        let mut pts = Vec::with_capacity(self.len() + 1);
        pts.push(self.intervals[0].lo);
        pts.extend(self.intervals.iter().map(|j| j.hi));
        pts
    }

    /// Index of the unique interval containing `x`.
    pub fn locate(&self, x: f64) -> Result<usize> {
        if !self.domain.contains(x) {
            return Err(Error::OutOfDomain {
                x,
                lo: self.domain.lo,
                hi: self.domain.hi,
            });
        }
        // Rightmost interval with lo <= x.
        let i = self.intervals.partition_point(|j| j.lo <= x) - 1;
        if self.intervals[i].contains(x) {
            Ok(i)
        } else {
            Err(Error::OutOfDomain {
                x,
                lo: self.domain.lo,
                hi: self.domain.hi,
            })
        }
    }

    pub fn geometry(&self, anchor: Option<f64>) -> PartitionGeometry {
        let widths = self.intervals.iter().map(Interval::width).collect();
        let distances = match anchor {
            Some(p) => self.intervals.iter().map(|j| j.distance_to(p)).collect(),
            None => Vec::new(),
        };
        PartitionGeometry {
            widths,
            anchor,
            distances,
        }
    }

    /// Line-based text form: one interval per line, `lo hi closed_flag grid`.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for j in &self.intervals {
            out.push_str(&format!(
                "{:?} {:?} {} {:?}\n",
                j.lo,
                j.hi,
                u8::from(j.right_closed),
                j.hi
            ));
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut cuts: Vec<f64> = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split_whitespace().collect();
            if fields.len() != 4 {
                return Err(Error::InvalidArgument(format!(
                    "partition line {}: expected 4 fields, got {}",
                    lineno + 1,
                    fields.len()
                )));
            }
            let lo: f64 = fields[0]
                .parse()
                .map_err(|e| Error::InvalidArgument(format!("line {}: {e}", lineno + 1)))?;
            let hi: f64 = fields[1]
                .parse()
                .map_err(|e| Error::InvalidArgument(format!("line {}: {e}", lineno + 1)))?;
            if cuts.is_empty() {
                cuts.push(lo);
            } else if *cuts.last().unwrap() != lo {
                return Err(Error::InvalidArgument(format!(
                    "line {}: interval does not abut the previous one",
                    lineno + 1
                )));
            }
            cuts.push(hi);
        }
        if cuts.len() < 2 {
            return Err(Error::InvalidArgument("empty partition text".into()));
        }
        Ok(Partition::from_cuts(cuts))
    }
}

/// Subinterval cut points of `[lo, hi]` with exact first and last endpoints.
fn split_cuts(lo: f64, hi: f64, n: usize, out: &mut Vec<f64>) {
    debug_assert!(n >= 1 && lo < hi);
    let width = (hi - lo) / n as f64;
    out.push(lo);
    for k in 1..n {
        out.push(lo + k as f64 * width);
    }
    out.push(hi);
}

/// Uniformly partitions a closed interval into `n` equal-length subintervals:
/// all half-open except the last, which is closed; `n = 1` returns the
/// interval itself.
pub fn unif_part(interval: Interval, n: usize) -> Result<Partition> {
    if n == 0 {
        return Err(Error::InvalidArgument("unif_part: n must be >= 1".into()));
    }
    if interval.is_empty() || !interval.right_closed {
        return Err(Error::InvalidArgument(
            "unif_part: interval must be non-empty and right-closed".into(),
        ));
    }
    let mut cuts = Vec::with_capacity(n + 1);
    split_cuts(interval.lo, interval.hi, n, &mut cuts);
    Ok(Partition::from_cuts(cuts))
}

/// Shared band construction for the two non-uniform builders.
///
/// The inner region `[center - 2r, center + 2r]` (clipped to the domain) is
/// split into `n_inner` pieces. For `q = 0..=q_max`, the left band
/// `[a - (2^{q+1}-1) r, a - (2^q-1) r)` and right band
/// `(b + (2^q-1) r, b + (2^{q+1}-1) r]` are clipped to the domain and split
/// into `k_outer` pieces each; bands that clip to nothing are dropped. If the
/// bands stop short of a domain edge, one unsplit tail piece extends the
/// tiling to that edge, so the result always covers the domain exactly.
fn build_nonuniform(
    dom_lo: f64,
    dom_hi: f64,
    center: f64,
    r: f64,
    n_inner: usize,
    k_outer: usize,
    q_max: usize,
) -> Partition {
    assert!(r > 0.0, "outer-band radius must be positive");
    assert!(n_inner >= 1 && k_outer >= 1);
    let clip = |x: f64| x.clamp(dom_lo, dom_hi);
    let a = clip(center - 2.0 * r);
    let b = clip(center + 2.0 * r);

    let mut cuts: Vec<f64> = Vec::new();
    if a < b {
        split_cuts(a, b, n_inner, &mut cuts);
    } else {
        cuts.push(a);
    }

    // Band edge at level q sits (2^q - 1) * r away from the inner region.
    let offset = |q: usize| ((1u64 << q) - 1) as f64 * r;
    for q in 0..=q_max {
        let (l_lo, l_hi) = (a - offset(q + 1), a - offset(q));
        let (lo, hi) = (clip(l_lo), clip(l_hi));
        if lo < hi {
            split_cuts(lo, hi, k_outer, &mut cuts);
        }
        let (r_lo, r_hi) = (b + offset(q), b + offset(q + 1));
        let (lo, hi) = (clip(r_lo), clip(r_hi));
        if lo < hi {
            split_cuts(lo, hi, k_outer, &mut cuts);
        }
    }

    // Tail pieces when q_max bands do not reach the domain edges.
    cuts.push(dom_lo);
    cuts.push(dom_hi);
    cuts.sort_by(f64::total_cmp);
    cuts.dedup();
    Partition::from_cuts(cuts)
}

/// Non-uniform partition of `[0, 1]` for the squared/absolute-error epoch
/// framework: a fine uniform inner region around `y_hat` flanked by
/// exponentially widening outer bands, each split into `k_outer` pieces.
pub fn build_nonuniform_cal(
    y_hat: f64,
    r: f64,
    n_inner: usize,
    k_outer: usize,
    q_max: usize,
) -> Partition {
    build_nonuniform(0.0, 1.0, y_hat, r, n_inner, k_outer, q_max)
}

/// Same construction in transformed coordinates: the domain is
/// `[theta(eta), theta(1 - eta)]` and the inner region is centered at
/// `theta_y_hat` (already in transformed coordinates).
pub fn build_nonuniform_pkl(
    theta_y_hat: f64,
    r: f64,
    n_inner: usize,
    k_outer: usize,
    q_max: usize,
    eta: f64,
) -> Partition {
    assert!(
        eta > 0.0 && eta <= 0.5,
        "eta must lie in (0, 1/2], got {eta}"
    );
    build_nonuniform(theta(eta), theta(1.0 - eta), theta_y_hat, r, n_inner, k_outer, q_max)
}
