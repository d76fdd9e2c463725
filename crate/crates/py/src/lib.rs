//! Python bindings: the partition geometry, calibration metrics, and the
//! experiment harness (config-text driven), mirroring the `seqcal` CLI.

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use seqcal::harness::{
    build_forecaster, fit_exponent as fit_exponent_impl, metrics_row, rows_csv, run_cell,
    summary_csv, sweep as sweep_impl, ExperimentConfig, ReportRow,
};
use seqcal::meta::{delta_prime, run_meta, CertificateFn};
use seqcal::metrics::{
    cal_l1, cal_l2, nonstationarity_c, pseudo_cal_l2, pseudo_kl, segment_count_k, EnvTrace,
    Transcript,
};
use seqcal::partition as part;
use seqcal::{iota, Error};

fn to_py_err(e: Error) -> PyErr {
    match e {
        Error::Config { .. } | Error::InvalidArgument(_) => PyValueError::new_err(e.to_string()),
        other => PyRuntimeError::new_err(other.to_string()),
    }
}

/// An ordered tiling of an interval; grid predictions are interval suprema.
#[pyclass(skip_from_py_object)]
#[derive(Clone)]
struct Partition {
    inner: part::Partition,
}

#[pymethods]
impl Partition {
    /// Uniform partition of `[lo, hi]` into `n` equal pieces.
    #[staticmethod]
    fn uniform(lo: f64, hi: f64, n: usize) -> PyResult<Self> {
        let inner = part::unif_part(part::Interval::closed(lo, hi), n).map_err(to_py_err)?;
        Ok(Partition { inner })
    }

    /// Non-uniform partition of `[0, 1]`: a fine inner region around `y_hat`
    /// flanked by exponentially widening outer bands.
    #[staticmethod]
    fn nonuniform(y_hat: f64, r: f64, n_inner: usize, k_outer: usize, q_max: usize) -> Self {
        Partition {
            inner: part::build_nonuniform_cal(y_hat, r, n_inner, k_outer, q_max),
        }
    }

    /// Transformed-domain variant over `[theta(eta), theta(1 - eta)]`.
    #[staticmethod]
    fn nonuniform_transformed(
        theta_y_hat: f64,
        r: f64,
        n_inner: usize,
        k_outer: usize,
        q_max: usize,
        eta: f64,
    ) -> Self {
        Partition {
            inner: part::build_nonuniform_pkl(theta_y_hat, r, n_inner, k_outer, q_max, eta),
        }
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    /// `(lo, hi, right_closed)` triples, in order.
    fn intervals(&self) -> Vec<(f64, f64, bool)> {
        self.inner
            .intervals()
            .iter()
            .map(|j| (j.lo, j.hi, j.right_closed))
            .collect()
    }

    fn grid(&self) -> Vec<f64> {
        self.inner.grid()
    }

    fn locate(&self, x: f64) -> PyResult<usize> {
        self.inner.locate(x).map_err(to_py_err)
    }

    fn widths(&self) -> Vec<f64> {
        self.inner.geometry(None).widths
    }

    fn distances(&self, anchor: f64) -> Vec<f64> {
        self.inner.geometry(Some(anchor)).distances
    }

    fn to_text(&self) -> String {
        self.inner.to_text()
    }

    #[staticmethod]
    fn from_text(text: &str) -> PyResult<Self> {
        Ok(Partition {
            inner: part::Partition::from_text(text).map_err(to_py_err)?,
        })
    }
}

/// `theta(p) = 2 asin(sqrt(p))`.
#[pyfunction]
fn theta(p: f64) -> f64 {
    seqcal::transform::theta(p)
}

/// `psi(z) = sin^2(z/2)`, the inverse of `theta`.
#[pyfunction]
fn psi(z: f64) -> f64 {
    seqcal::transform::psi(z)
}

fn row_dict<'py>(py: Python<'py>, row: &ReportRow) -> PyResult<Bound<'py, PyDict>> {
    let d = PyDict::new(py);
    d.set_item("algorithm", &row.algorithm)?;
    d.set_item("env", &row.env)?;
    d.set_item("horizon", row.horizon)?;
    d.set_item("seed", row.seed)?;
    d.set_item("cal1", row.cal1)?;
    d.set_item("cal2", row.cal2)?;
    d.set_item("pcal2", row.pcal2)?;
    d.set_item("pkl", row.pkl)?;
    d.set_item("c", row.c)?;
    d.set_item("k", row.k)?;
    Ok(d)
}

/// Runs the first (algorithm, env, horizon) cell of a config and returns the
/// metric row as a dict, optionally with the transcript text attached.
#[pyfunction]
#[pyo3(signature = (config, seed=None, transcript=false))]
fn simulate<'py>(
    py: Python<'py>,
    config: &str,
    seed: Option<u64>,
    transcript: bool,
) -> PyResult<Bound<'py, PyDict>> {
    let cfg = ExperimentConfig::parse(config).map_err(to_py_err)?;
    let algo = cfg
        .algorithms
        .first()
        .ok_or_else(|| PyValueError::new_err("config has no [algorithm] block"))?;
    let seed = seed.unwrap_or(cfg.seeds[0]);
    let (row, tr) = run_cell(algo, &cfg.envs[0], cfg.horizons[0], seed, cfg.delta, cfg.c_iota)
        .map_err(to_py_err)?;
    let d = row_dict(py, &row)?;
    if transcript {
        d.set_item("transcript", tr.to_text())?;
    }
    Ok(d)
}

/// Runs the full config grid; returns `(rows_csv, summary_csv)`.
#[pyfunction]
fn sweep(config: &str) -> PyResult<(String, String)> {
    let cfg = ExperimentConfig::parse(config).map_err(to_py_err)?;
    let report = sweep_impl(&cfg);
    if let Some((cell, err)) = report.failures.first() {
        return Err(PyRuntimeError::new_err(format!("cell {cell}: {err}")));
    }
    Ok((rows_csv(&report.rows, false), summary_csv(&report.rows)))
}

/// All calibration metrics of a transcript in the line format
/// `t q y p k a1 w1 ...`.
#[pyfunction]
fn metrics<'py>(py: Python<'py>, transcript: &str) -> PyResult<Bound<'py, PyDict>> {
    let tr = Transcript::from_text(transcript).map_err(to_py_err)?;
    let d = PyDict::new(py);
    d.set_item("rounds", tr.horizon())?;
    d.set_item("cal1", cal_l1(&tr))?;
    d.set_item("cal2", cal_l2(&tr))?;
    d.set_item("pcal2", pseudo_cal_l2(&tr))?;
    d.set_item("pkl", pseudo_kl(&tr))?;
    let qs: Vec<f64> = tr.rounds().iter().filter_map(|r| r.q).collect();
    if qs.len() == tr.horizon() && !qs.is_empty() {
        let trace = EnvTrace::new(qs);
        let (c, p_star) = nonstationarity_c(&trace);
        d.set_item("c", c)?;
        d.set_item("k", segment_count_k(&trace))?;
        d.set_item("p_star", p_star)?;
    }
    Ok(d)
}

/// Runs the restart meta-framework from a config with a `[meta]` block;
/// returns `(metalog_csv, row_dict)`.
#[pyfunction]
#[pyo3(signature = (config, seed=None))]
fn meta<'py>(
    py: Python<'py>,
    config: &str,
    seed: Option<u64>,
) -> PyResult<(String, Bound<'py, PyDict>)> {
    let cfg = ExperimentConfig::parse(config).map_err(to_py_err)?;
    let meta_cfg = cfg
        .meta
        .clone()
        .ok_or_else(|| PyValueError::new_err("config has no [meta] block"))?;
    let horizon = cfg.horizons[0];
    let seed = seed.unwrap_or(cfg.seeds[0]);
    let spec = cfg.envs[0].instantiate(horizon).map_err(to_py_err)?;
    let stream = seqcal::env::generate(&spec, seed).map_err(to_py_err)?;
    let mut cert = CertificateFn::defaults(
        meta_cfg.family,
        horizon,
        iota(horizon, delta_prime(cfg.delta, horizon), cfg.c_iota),
        meta_cfg.cert_scale,
    );
    if let Some(a) = meta_cfg.alpha1 {
        cert.alpha1 = a;
    }
    if let Some(a) = meta_cfg.alpha2 {
        cert.alpha2 = a;
    }
    if let Some(h) = meta_cfg.h {
        cert.h = h;
    }
    let base = meta_cfg.base.clone();
    let c_iota = cfg.c_iota;
    let mut factory = move |confidence: f64, guess: f64, child_seed: u64| {
        let mut spec = base.clone();
        spec.c_guess = guess;
        build_forecaster(&spec, horizon, confidence, c_iota, child_seed)
    };
    let (tr, log) = run_meta(&mut factory, &cert, cfg.delta, &stream, seed).map_err(to_py_err)?;
    let label = format!("meta[{}]+{}", cert.family.name(), meta_cfg.base.label());
    let row = metrics_row(label, cfg.envs[0].label(), horizon, seed, &tr, &stream, 0.0);
    Ok((log.to_csv(), row_dict(py, &row)?))
}

/// Least-squares slope of `log(value)` against `log(horizon)`.
#[pyfunction]
fn fit_exponent(pairs: Vec<(f64, f64)>) -> PyResult<f64> {
    fit_exponent_impl(&pairs).map_err(to_py_err)
}

#[pymodule]
fn seqcal_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Partition>()?;
    m.add_function(wrap_pyfunction!(theta, m)?)?;
    m.add_function(wrap_pyfunction!(psi, m)?)?;
    m.add_function(wrap_pyfunction!(simulate, m)?)?;
    m.add_function(wrap_pyfunction!(sweep, m)?)?;
    m.add_function(wrap_pyfunction!(metrics, m)?)?;
    m.add_function(wrap_pyfunction!(meta, m)?)?;
    m.add_function(wrap_pyfunction!(fit_exponent, m)?)?;
    Ok(())
}
