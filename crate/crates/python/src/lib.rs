//! Python bindings: budgets, calibration, the five estimators and the
//! synthetic generators. Matrices cross the boundary as lists of rows.

use dpols::accounting::{self, PrivacyBudget};
use dpols::data::{normalize, Dataset};
use dpols::estimators::{fit_method, FitResult, Method, MethodOptions};
use dpols::experiments::{synth_gaussian as synth_gaussian_rs, synth_mlp_lowrank as synth_mlp_rs};
use dpols::rng::RngStream;
use nalgebra::{DMatrix, DVector};
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

fn to_py(e: dpols::Error) -> PyErr {
    if e.is_solver_failure() {
        PyRuntimeError::new_err(e.to_string())
    } else {
        PyValueError::new_err(e.to_string())
    }
}

fn matrix(rows: &[Vec<f64>]) -> PyResult<DMatrix<f64>> {
    let n = rows.len();
    let d = rows.first().map_or(0, Vec::len);
    if rows.iter().any(|r| r.len() != d) {
        return Err(PyValueError::new_err("rows of x have different lengths"));
    }
    Ok(DMatrix::from_fn(n, d, |i, j| rows[i][j]))
}

fn rows_of(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

/// Privacy budget `(epsilon, delta)` plus the utility failure probability `rho`.
#[pyclass(name = "PrivacyBudget", frozen)]
struct PyBudget {
    inner: PrivacyBudget,
}

#[pymethods]
impl PyBudget {
    #[new]
    fn new(epsilon: f64, delta: f64, rho: f64) -> PyResult<Self> {
        Ok(Self { inner: PrivacyBudget::new(epsilon, delta, rho).map_err(to_py)? })
    }

    #[getter]
    fn epsilon(&self) -> f64 {
        self.inner.epsilon
    }

    #[getter]
    fn delta(&self) -> f64 {
        self.inner.delta
    }

    #[getter]
    fn rho(&self) -> f64 {
        self.inner.rho
    }

    fn __repr__(&self) -> String {
        format!("PrivacyBudget(epsilon={}, delta={}, rho={})", self.inner.epsilon, self.inner.delta, self.inner.rho)
    }
}

fn fit_dict<'py>(py: Python<'py>, fit: &FitResult, x_scale: f64, y_scale: f64) -> PyResult<Bound<'py, PyDict>> {
    let out = PyDict::new(py);
    out.set_item("theta", fit.theta.clone())?;
    // coefficients in the units of the data that was passed in
    let raw: Vec<f64> = fit.theta.iter().map(|t| t * y_scale / x_scale).collect();
    out.set_item("theta_original_units", raw)?;
    out.set_item("sketch_size", fit.sketch_size)?;
    out.set_item("gamma", fit.gamma)?;
    let iters: Vec<(usize, usize, f64, f64, f64)> = fit
        .per_iteration
        .iter()
        .map(|r| (r.iteration, r.clip_count, r.excess_risk, r.eta, r.sigma))
        .collect();
    out.set_item("per_iteration", iters)?;
    Ok(out)
}

/// Fits `method` on `(x, y)`. The data is normalized to unit bounds first;
/// `delta` defaults to `1/n^2` and `rho` to `delta/10`.
#[pyfunction]
#[pyo3(signature = (method, x, y, epsilon, delta=None, rho=None, seed=0, iterations=None, k=None, clip=None, include_ridge_term=false, learning_rate=None))]
#[allow(clippy::too_many_arguments)]
fn fit<'py>(
    py: Python<'py>,
    method: &str,
    x: Vec<Vec<f64>>,
    y: Vec<f64>,
    epsilon: f64,
    delta: Option<f64>,
    rho: Option<f64>,
    seed: u64,
    iterations: Option<u32>,
    k: Option<usize>,
    clip: Option<f64>,
    include_ridge_term: bool,
    learning_rate: Option<f64>,
) -> PyResult<Bound<'py, PyDict>> {
    let method: Method = method.parse().map_err(to_py)?;
    let raw = Dataset::from_observed(matrix(&x)?, DVector::from_vec(y)).map_err(to_py)?;
    let (ds, _, scales) = normalize(&raw, &raw).map_err(to_py)?;
    let n = ds.n() as f64;
    let delta = delta.unwrap_or(1.0 / (n * n));
    let budget = PrivacyBudget::new(epsilon, delta, rho.unwrap_or(delta / 10.0)).map_err(to_py)?;
    let opts = MethodOptions {
        iterations,
        k,
        clip,
        include_ridge_term,
        learning_rate,
        ..MethodOptions::default()
    };
    let result = py
        .detach(|| fit_method(method, &ds, &budget, &opts, &RngStream::new(seed, 0)))
        .map_err(to_py)?;
    let out = fit_dict(py, &result, scales.x_scale, scales.y_scale)?;
    out.set_item("method", method.name())?;
    out.set_item("budget", PyBudget { inner: budget })?;
    Ok(out)
}

/// Smallest mixing noise floor meeting `(epsilon, delta)` for a `k`-row sketch.
#[pyfunction]
fn calibrate_gamma(epsilon: f64, delta: f64, k: u64) -> PyResult<f64> {
    accounting::calibrate_gamma(epsilon, delta, k).map_err(to_py)
}

/// Privacy level of the mixing pipeline at noise parameters `(eta, gamma)`.
#[pyfunction]
fn mixing_epsilon(eta: f64, gamma: f64, k: u64, delta: f64) -> PyResult<f64> {
    accounting::mixing_epsilon(eta, gamma, k, delta).map_err(to_py)
}

/// Closed-form `(gamma, sigma, tau, eta)` for the iterative method.
#[pyfunction]
fn theorem1_noise(epsilon: f64, delta: f64, k: u64, iterations: u32, clip_c: f64, rho: f64) -> PyResult<(f64, f64, f64, f64)> {
    let p = accounting::theorem1_noise(epsilon, delta, k, iterations, clip_c, rho).map_err(to_py)?;
    Ok((p.gamma, p.sigma, p.tau, p.eta))
}

#[pyfunction]
fn analytic_gaussian_sigma(sensitivity: f64, epsilon: f64, delta: f64) -> PyResult<f64> {
    accounting::analytic_gaussian_sigma(sensitivity, epsilon, delta).map_err(to_py)
}

/// Normalized Gaussian-design instance as `(x_rows, y)`.
#[pyfunction]
#[pyo3(signature = (n, d, noise_sd=0.1, cond=1.0, seed=0))]
fn synth_gaussian(n: usize, d: usize, noise_sd: f64, cond: f64, seed: u64) -> PyResult<(Vec<Vec<f64>>, Vec<f64>)> {
    let ds = synth_gaussian_rs(n, d, noise_sd, cond, seed).map_err(to_py)?;
    Ok((rows_of(ds.x()), ds.y().as_slice().to_vec()))
}

/// Normalized near-low-rank perceptron features as `(x_rows, y)`.
#[pyfunction]
#[pyo3(signature = (n, out_dim=128, noise_sd=0.1, seed=0))]
fn synth_mlp_lowrank(n: usize, out_dim: usize, noise_sd: f64, seed: u64) -> PyResult<(Vec<Vec<f64>>, Vec<f64>)> {
    let ds = synth_mlp_rs(n, out_dim, noise_sd, seed).map_err(to_py)?;
    Ok((rows_of(ds.x()), ds.y().as_slice().to_vec()))
}

#[pymodule]
fn dpols_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyBudget>()?;
    m.add_function(wrap_pyfunction!(fit, m)?)?;
    m.add_function(wrap_pyfunction!(calibrate_gamma, m)?)?;
    m.add_function(wrap_pyfunction!(mixing_epsilon, m)?)?;
    m.add_function(wrap_pyfunction!(theorem1_noise, m)?)?;
    m.add_function(wrap_pyfunction!(analytic_gaussian_sigma, m)?)?;
    m.add_function(wrap_pyfunction!(synth_gaussian, m)?)?;
    m.add_function(wrap_pyfunction!(synth_mlp_lowrank, m)?)?;
    m.add("METHODS", Method::ALL.iter().map(|m| m.name()).collect::<Vec<_>>())?;
    Ok(())
}
