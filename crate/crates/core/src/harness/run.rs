//! Cell execution and aggregation: one `(algorithm, env, horizon, seed)`
//! cell per task, no shared mutable state, results merged by sorting.

use std::time::Instant;

use rayon::prelude::*;

use crate::env::{generate, stream_rng, EnvStream};
use crate::error::{Error, Result};
use crate::forecasters::{
    hu_uniform, EpochFramework, EpochVariant, Forecaster, SimpleEpoch, SimpleEpochPkl, SwapKlBase,
    SwapL2Base,
};
use crate::harness::config::{AlgorithmSpec, EnvTemplate, ExperimentConfig};
use crate::metrics::{
    cal_l1, cal_l2, nonstationarity_c, pseudo_cal_l2, pseudo_kl, segment_count_k, RoundRecord,
    Transcript,
};
use crate::partition::{unif_part, Interval};
use crate::transform::theta;
use crate::{iota, Error as CrateError};

/// Default grid size for the standalone swap bases: the adversarial-rate
/// order `T^{1/3}`.
fn default_swap_grid(horizon: usize) -> usize {
    ((horizon as f64).cbrt().ceil() as usize).max(1)
}

/// Builds a forecaster by name. `seed` feeds the forecaster's private
/// sampling stream only; environments draw from a separate stream.
pub fn build_forecaster(
    spec: &AlgorithmSpec,
    horizon: usize,
    delta: f64,
    c_iota: f64,
    seed: u64,
) -> Result<Box<dyn Forecaster>> {
    let iota = iota(horizon, delta, c_iota);
    let rng = stream_rng(seed, 1);
    Ok(match spec.name.as_str() {
        "simple_epoch" => Box::new(SimpleEpoch::new()),
        "simple_epoch_pkl" => Box::new(SimpleEpochPkl::new(iota)),
        "hu_uniform" => Box::new(hu_uniform(horizon, spec.c_guess, iota, rng)?),
        "epoch_cal1" => Box::new(EpochFramework::hu(
            EpochVariant::Cal1,
            spec.c_guess,
            horizon,
            iota,
            rng,
        )),
        "epoch_cal2" => Box::new(EpochFramework::hu(
            EpochVariant::Cal2,
            spec.c_guess,
            horizon,
            iota,
            rng,
        )),
        "epoch_pkl" => Box::new(EpochFramework::pkl(spec.c_guess, horizon, iota, rng)),
        "swap_l2_uniform" => {
            let n = spec.n.unwrap_or_else(|| default_swap_grid(horizon));
            let partition = unif_part(Interval::closed(0.0, 1.0), n)?;
            Box::new(SwapL2Base::new(partition, rng)?)
        }
        "swap_kl_uniform" => {
            let n = spec.n.unwrap_or_else(|| default_swap_grid(horizon));
            let eta = 1.0 / (horizon as f64 + 1.0);
            let partition = unif_part(Interval::closed(theta(eta), theta(1.0 - eta)), n)?;
            Box::new(SwapKlBase::new(partition, eta, horizon, rng)?)
        }
        other => {
            return Err(Error::config(
                "algorithm",
                format!("unknown algorithm '{other}'"),
            ))
        }
    })
}

/// Plays the forecaster against a pre-drawn environment, validating the
/// round contract every round.
pub fn run_forecaster(fc: &mut dyn Forecaster, stream: &EnvStream) -> Result<Transcript> {
    let mut transcript = Transcript::new();
    for (t, (&q, &y)) in stream
        .trace
        .means()
        .iter()
        .zip(&stream.outcomes)
        .enumerate()
    {
        let rp = fc.next_distribution()?;
        let record = RoundRecord {
            q: Some(q),
            y,
            dist: rp.dist,
            p: rp.prediction,
            raw_dist: rp.raw_dist,
        };
        record
            .validate()
            .map_err(|e| CrateError::Contract(format!("round {}: {e}", t + 1)))?;
        fc.observe(y)?;
        transcript.push(record);
    }
    Ok(transcript)
}

/// One metrics row of a report.
#[derive(Debug, Clone)]
pub struct ReportRow {
    pub algorithm: String,
    pub env: String,
    pub horizon: usize,
    pub seed: u64,
    pub cal1: f64,
    pub cal2: f64,
    pub pcal2: f64,
    pub pkl: f64,
    pub c: f64,
    pub k: usize,
    /// Wall time; excluded from determinism guarantees and only written to
    /// CSV when timing is requested.
    pub wall_ms: f64,
}

pub fn metrics_row(
    algorithm: String,
    env: String,
    horizon: usize,
    seed: u64,
    transcript: &Transcript,
    stream: &EnvStream,
    wall_ms: f64,
) -> ReportRow {
    let (c, _) = nonstationarity_c(&stream.trace);
    ReportRow {
        algorithm,
        env,
        horizon,
        seed,
        cal1: cal_l1(transcript),
        cal2: cal_l2(transcript),
        pcal2: pseudo_cal_l2(transcript),
        pkl: pseudo_kl(transcript),
        c,
        k: segment_count_k(&stream.trace),
        wall_ms,
    }
}

/// Runs one cell and returns its row and transcript.
pub fn run_cell(
    algo: &AlgorithmSpec,
    env: &EnvTemplate,
    horizon: usize,
    seed: u64,
    delta: f64,
    c_iota: f64,
) -> Result<(ReportRow, Transcript)> {
    let started = Instant::now();
    let spec = env.instantiate(horizon)?;
    let stream = generate(&spec, seed)?;
    let mut fc = build_forecaster(algo, horizon, delta, c_iota, seed)?;
    let transcript = run_forecaster(fc.as_mut(), &stream)?;
    let wall_ms = started.elapsed().as_secs_f64() * 1e3;
    let row = metrics_row(
        algo.label(),
        env.label(),
        horizon,
        seed,
        &transcript,
        &stream,
        wall_ms,
    );
    Ok((row, transcript))
}

/// A sweep outcome: completed rows plus flagged failures, both sorted.
#[derive(Debug, Clone, Default)]
pub struct SweepReport {
    pub rows: Vec<ReportRow>,
    /// `(cell id, error)` for cells that failed; the rest complete normally.
    pub failures: Vec<(String, String)>,
}

/// Runs the full grid, one cell per task in parallel, then sorts for
/// deterministic output.
pub fn sweep(cfg: &ExperimentConfig) -> SweepReport {
    let mut cells = Vec::new();
    for algo in &cfg.algorithms {
        for env in &cfg.envs {
            for &horizon in &cfg.horizons {
                for &seed in &cfg.seeds {
                    cells.push((algo.clone(), env.clone(), horizon, seed));
                }
            }
        }
    }
    let results: Vec<_> = cells
        .par_iter()
        .map(|(algo, env, horizon, seed)| {
            run_cell(algo, env, *horizon, *seed, cfg.delta, cfg.c_iota).map(|(row, _)| row)
        })
        .collect();

    let mut report = SweepReport::default();
    for ((algo, env, horizon, seed), result) in cells.iter().zip(results) {
        match result {
            Ok(row) => report.rows.push(row),
            Err(e) => report.failures.push((
                format!("{}|{}|{}|{}", algo.label(), env.label(), horizon, seed),
                e.to_string(),
            )),
        }
    }
    report.rows.sort_by(|a, b| {
        (&a.algorithm, &a.env, a.horizon, a.seed).cmp(&(&b.algorithm, &b.env, b.horizon, b.seed))
    });
    report.failures.sort();
    report
}

/// Convenience wrapper: run the grid, error out if any cell failed.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<Vec<ReportRow>> {
    let report = sweep(cfg);
    if let Some((cell, err)) = report.failures.first() {
        return Err(CrateError::Contract(format!("cell {cell}: {err}")));
    }
    Ok(report.rows)
}

pub fn rows_csv(rows: &[ReportRow], timing: bool) -> String {
    let mut out = String::from("algorithm,env,horizon,seed,cal1,cal2,pcal2,pkl,c,k,wall_ms\n");
    for r in rows {
        let wall = if timing {
            format!("{:.3}", r.wall_ms)
        } else {
            "-".into()
        };
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{},{}\n",
            r.algorithm,
            r.env,
            r.horizon,
            r.seed,
            r.cal1,
            r.cal2,
            r.pcal2,
            r.pkl,
            r.c,
            r.k,
            wall
        ));
    }
    out
}

/// Lower median helper (deterministic; sorted element at `floor((n-1)/2)`).
pub fn median(values: &[f64]) -> f64 {
    assert!(!values.is_empty());
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    sorted[(sorted.len() - 1) / 2]
}

fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

/// Mean/median per (algorithm, env, horizon) cell group, over seeds.
pub fn summary_csv(rows: &[ReportRow]) -> String {
    let mut out = String::from(
        "algorithm,env,horizon,seeds,cal1_mean,cal1_median,cal2_mean,cal2_median,\
         pcal2_mean,pcal2_median,pkl_mean,pkl_median\n",
    );
    let mut groups: Vec<(&str, &str, usize, Vec<&ReportRow>)> = Vec::new();
    for row in rows {
        match groups.iter_mut().find(|(a, e, h, _)| {
            *a == row.algorithm && *e == row.env && *h == row.horizon
        }) {
            Some((_, _, _, members)) => members.push(row),
            None => groups.push((&row.algorithm, &row.env, row.horizon, vec![row])),
        }
    }
    for (algo, env, horizon, members) in groups {
        let collect = |f: fn(&ReportRow) -> f64| -> Vec<f64> { members.iter().map(|r| f(r)).collect() };
        let cal1 = collect(|r| r.cal1);
        let cal2 = collect(|r| r.cal2);
        let pcal2 = collect(|r| r.pcal2);
        let pkl = collect(|r| r.pkl);
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{},{},{}\n",
            algo,
            env,
            horizon,
            members.len(),
            mean(&cal1),
            median(&cal1),
            mean(&cal2),
            median(&cal2),
            mean(&pcal2),
            median(&pcal2),
            mean(&pkl),
            median(&pkl),
        ));
    }
    out
}

/// Least-squares slope of `log(value)` against `log(horizon)`.
pub fn fit_exponent(pairs: &[(f64, f64)]) -> Result<f64> {
    if pairs.len() < 3 {
        return Err(Error::InvalidArgument(
            "exponent fit needs at least 3 points".into(),
        ));
    }
    for &(x, y) in pairs {
        if !(x > 0.0 && y > 0.0 && x.is_finite() && y.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "exponent fit needs positive finite points, got ({x}, {y})"
            )));
        }
    }
    let logs: Vec<(f64, f64)> = pairs.iter().map(|&(x, y)| (x.ln(), y.ln())).collect();
    let n = logs.len() as f64;
    let mx = logs.iter().map(|p| p.0).sum::<f64>() / n;
    let my = logs.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = logs.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    let sxy: f64 = logs.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    if sxx == 0.0 {
        return Err(Error::InvalidArgument(
            "exponent fit needs at least two distinct horizons".into(),
        ));
    }
    Ok(sxy / sxx)
}

/// Median value per horizon, then the fitted exponent; the shape every
/// scaling check uses.
pub fn fit_metric_exponent(rows: &[ReportRow], metric: fn(&ReportRow) -> f64) -> Result<f64> {
    let mut horizons: Vec<usize> = rows.iter().map(|r| r.horizon).collect();
    horizons.sort_unstable();
    horizons.dedup();
    let pairs: Vec<(f64, f64)> = horizons
        .iter()
        .map(|&h| {
            let vals: Vec<f64> = rows
                .iter()
                .filter(|r| r.horizon == h)
                .map(|r| metric(r))
                .collect();
            (h as f64, median(&vals))
        })
        .collect();
    fit_exponent(&pairs)
}
