//! Stationary distributions of sparse row-stochastic matrices whose rows
//! have at most two nonzero entries (the rounding chains built by the
//! swap-regret bases).

use crate::error::{Error, Result};

const RESIDUAL_TOL: f64 = 1e-10;

fn multiply(pi: &[f64], rows: &[Vec<(usize, f64)>], out: &mut [f64]) {
    out.fill(0.0);
    for (s, row) in rows.iter().enumerate() {
        for &(t, w) in row {
            out[t] += pi[s] * w;
        }
    }
}

fn l1_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum()
}

/// Solves `pi Q = pi`, `sum pi = 1` by Gaussian elimination on
/// `(Q^T - I) pi = 0` with the last equation replaced by the mass constraint.
fn dense_solve(rows: &[Vec<(usize, f64)>]) -> Option<Vec<f64>> {
    let n = rows.len();
    let mut a = vec![0.0f64; n * n];
    for i in 0..n {
        a[i * n + i] = -1.0;
    }
    for (s, row) in rows.iter().enumerate() {
        for &(t, w) in row {
            a[t * n + s] += w;
        }
    }
    let mut rhs = vec![0.0f64; n];
    for s in 0..n {
        a[(n - 1) * n + s] = 1.0;
    }
    rhs[n - 1] = 1.0;

    // Gaussian elimination with partial pivoting.
    for col in 0..n {
        let mut pivot = col;
        for r in col + 1..n {
            if a[r * n + col].abs() > a[pivot * n + col].abs() {
                pivot = r;
            }
        }
        if a[pivot * n + col].abs() < 1e-14 {
            return None;
        }
        if pivot != col {
            for k in 0..n {
                a.swap(col * n + k, pivot * n + k);
            }
            rhs.swap(col, pivot);
        }
        let d = a[col * n + col];
        for r in col + 1..n {
            let f = a[r * n + col] / d;
            if f == 0.0 {
                continue;
            }
            a[r * n + col] = 0.0;
            for k in col + 1..n {
                a[r * n + k] -= f * a[col * n + k];
            }
            rhs[r] -= f * rhs[col];
        }
    }
    let mut x = vec![0.0f64; n];
    for col in (0..n).rev() {
        let mut acc = rhs[col];
        for k in col + 1..n {
            acc -= a[col * n + k] * x[k];
        }
        x[col] = acc / a[col * n + col];
    }
    for v in &mut x {
        *v = v.max(0.0);
    }
    let mass: f64 = x.iter().sum();
    if mass <= 0.0 {
        return None;
    }
    for v in &mut x {
        *v /= mass;
    }
    Some(x)
}

/// Stationary distribution of a sparse row-stochastic matrix.
///
/// Power iteration from the uniform start, with a Cesaro-averaged candidate
/// checked alongside the raw iterate (the average handles the periodic
/// chains two-point rounding rows can form). After
/// `200 * ceil(log2(states))` iterations without reaching an l1 residual of
/// `1e-10`, falls back to a dense linear solve for up to 512 states; a
/// residual still above the target is a convergence error.
pub fn stationary_distribution(rows: &[Vec<(usize, f64)>]) -> Result<Vec<f64>> {
    let n = rows.len();
    if n == 0 {
        return Err(Error::InvalidArgument("empty transition matrix".into()));
    }
    for (s, row) in rows.iter().enumerate() {
        if row.len() > 2 {
            return Err(Error::InvalidArgument(format!(
                "row {s} has {} nonzeros; at most 2 allowed",
                row.len()
            )));
        }
        let mut sum = 0.0;
        for &(t, w) in row {
            if t >= n || w < 0.0 {
                return Err(Error::InvalidArgument(format!("row {s}: bad entry ({t}, {w})")));
            }
            sum += w;
        }
        if (sum - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidArgument(format!("row {s} sums to {sum}")));
        }
    }

    let max_iters = 200 * ((n.max(2) as f64).log2().ceil() as usize);
    let mut cur = vec![1.0 / n as f64; n];
    let mut next = vec![0.0f64; n];
    let mut acc = vec![0.0f64; n];
    let mut avg = vec![0.0f64; n];
    let mut avg_next = vec![0.0f64; n];
    let mut best_residual = f64::INFINITY;

    for iter in 1..=max_iters {
        multiply(&cur, rows, &mut next);
        let r = l1_diff(&next, &cur);
        best_residual = best_residual.min(r);
        if r <= RESIDUAL_TOL {
            return Ok(cur);
        }
        for i in 0..n {
            acc[i] += cur[i];
            avg[i] = acc[i] / iter as f64;
        }
        multiply(&avg, rows, &mut avg_next);
        let ra = l1_diff(&avg_next, &avg);
        best_residual = best_residual.min(ra);
        if ra <= RESIDUAL_TOL {
            return Ok(avg);
        }
        std::mem::swap(&mut cur, &mut next);
    }

    if n <= 512 {
        if let Some(pi) = dense_solve(rows) {
            multiply(&pi, rows, &mut next);
            let r = l1_diff(&next, &pi);
            if r <= RESIDUAL_TOL {
                return Ok(pi);
            }
            best_residual = best_residual.min(r);
        }
    }
    Err(Error::Convergence {
        residual: best_residual,
    })
}

/// l1 residual `||pi Q - pi||_1` of a candidate stationary vector.
pub fn stationary_residual(pi: &[f64], rows: &[Vec<(usize, f64)>]) -> f64 {
    let mut out = vec![0.0f64; pi.len()];
    multiply(pi, rows, &mut out);
    l1_diff(&out, pi)
}
