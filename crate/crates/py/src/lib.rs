//! Python bindings: model parameters, simulation, offline and online
//! identification, model-free state estimation, the discounted DARE and
//! the experiment runner.

use nalgebra::DMatrix;
use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use pyo3::types::PyDict;

use armax::harness::{run_experiment as run_config, ExperimentConfig};
use armax::model::Trajectory;

fn py_err(e: armax::Error) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn to_matrix(rows: &[Vec<f64>]) -> PyResult<DMatrix<f64>> {
    let ncols = rows.first().map_or(0, Vec::len);
    if rows.iter().any(|r| r.len() != ncols) {
        return Err(PyValueError::new_err("ragged matrix"));
    }
    Ok(DMatrix::from_fn(rows.len(), ncols, |i, j| rows[i][j]))
}

fn to_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

/// ARMAX polynomial coefficients and noise variance.
#[pyclass(name = "ArmaxParams", module = "armax", from_py_object)]
#[derive(Clone)]
pub struct PyArmaxParams {
    inner: armax::ArmaxParams,
}

#[pymethods]
impl PyArmaxParams {
    #[new]
    #[pyo3(signature = (a, b, c, sigma2 = 1.0))]
    fn new(a: Vec<f64>, b: Vec<f64>, c: Vec<f64>, sigma2: f64) -> PyResult<Self> {
        Ok(Self { inner: armax::ArmaxParams::new(a, b, c, sigma2).map_err(py_err)? })
    }

    #[getter]
    fn a(&self) -> Vec<f64> {
        self.inner.a.coeffs().to_vec()
    }

    #[getter]
    fn b(&self) -> Vec<f64> {
        self.inner.b.coeffs().to_vec()
    }

    #[getter]
    fn c(&self) -> Vec<f64> {
        self.inner.c.coeffs().to_vec()
    }

    #[getter]
    fn sigma2(&self) -> f64 {
        self.inner.sigma2
    }

    /// `(n, m, p)`.
    #[getter]
    fn orders(&self) -> (usize, usize, usize) {
        (self.inner.n(), self.inner.m(), self.inner.p())
    }

    /// Stacked `[a, b, c]`.
    fn theta(&self) -> Vec<f64> {
        self.inner.theta().iter().copied().collect()
    }

    /// Observable-canonical `(A, B1, B2, C)` as nested lists.
    fn canonical(&self) -> PyResult<(Vec<Vec<f64>>, Vec<Vec<f64>>, Vec<Vec<f64>>, Vec<Vec<f64>>)> {
        let ss = armax::to_observable_canonical(&self.inner).map_err(py_err)?;
        Ok((to_rows(&ss.a), to_rows(&ss.b1), to_rows(&ss.b2), to_rows(&ss.c)))
    }

    fn __repr__(&self) -> String {
        format!(
            "ArmaxParams(a={:?}, b={:?}, c={:?}, sigma2={})",
            self.inner.a.coeffs(),
            self.inner.b.coeffs(),
            self.inner.c.coeffs(),
            self.inner.sigma2
        )
    }
}

fn trajectory_dict<'py>(py: Python<'py>, traj: &Trajectory) -> PyResult<Bound<'py, PyDict>> {
    let d = PyDict::new(py);
    d.set_item("u", &traj.u)?;
    d.set_item("y", &traj.y)?;
    d.set_item("w", &traj.w)?;
    d.set_item("x", &traj.x)?;
    d.set_item("seed", traj.seed)?;
    Ok(d)
}

fn trajectory(u: Vec<f64>, y: Vec<f64>) -> PyResult<Trajectory> {
    let traj = Trajectory { u, y, w: None, x: None, seed: 0 };
    traj.validate().map_err(py_err)?;
    Ok(traj)
}

/// Simulates `params` driven by `u`; returns a dict with `u`, `y` and,
/// with `truth=True`, the noise `w` and canonical states `x`.
#[pyfunction]
#[pyo3(signature = (params, u, seed, truth = false))]
fn simulate<'py>(py: Python<'py>, params: &PyArmaxParams, u: Vec<f64>, seed: u64, truth: bool) -> PyResult<Bound<'py, PyDict>> {
    let horizon = u.len();
    let traj = armax::simulate_armax(&params.inner, &u, horizon, seed, truth).map_err(py_err)?;
    trajectory_dict(py, &traj)
}

/// Batch identification (instrumental variables plus MA value
/// iteration). Returns `(params, condition_number)`.
#[pyfunction]
#[pyo3(signature = (u, y, n, m, p, vi_iterations = 200))]
fn identify_offline(u: Vec<f64>, y: Vec<f64>, n: usize, m: usize, p: usize, vi_iterations: usize) -> PyResult<(PyArmaxParams, f64)> {
    let id = armax::armax_identify_offline(&trajectory(u, y)?, n, m, p, vi_iterations).map_err(py_err)?;
    let condition = id.iv.condition();
    Ok((PyArmaxParams { inner: id.params }, condition))
}

/// Recursive identifier fed one `(u, y)` sample at a time.
#[pyclass(name = "OnlineIdentifier", module = "armax")]
pub struct PyOnlineIdentifier {
    inner: armax::OnlineIdentifier,
}

#[pymethods]
impl PyOnlineIdentifier {
    #[new]
    #[pyo3(signature = (n, m, p, p0 = armax::online::DEFAULT_P0))]
    fn new(n: usize, m: usize, p: usize, p0: f64) -> PyResult<Self> {
        Ok(Self { inner: armax::OnlineIdentifier::new(n, m, p, p0).map_err(py_err)? })
    }

    /// Consumes one sample and returns the current `[a, b, c]`.
    fn step(&mut self, u: f64, y: f64) -> Vec<f64> {
        self.inner.step(u, y).iter().copied().collect()
    }

    /// Feeds whole sequences; returns the final estimate.
    fn run(&mut self, u: Vec<f64>, y: Vec<f64>) -> PyResult<Vec<f64>> {
        if u.len() != y.len() {
            return Err(PyValueError::new_err("u and y differ in length"));
        }
        for (u, y) in u.into_iter().zip(y) {
            self.inner.step(u, y);
        }
        Ok(self.theta())
    }

    fn theta(&self) -> Vec<f64> {
        self.inner.theta().iter().copied().collect()
    }

    #[getter]
    fn eps2(&self) -> f64 {
        self.inner.eps2()
    }

    #[getter]
    fn samples(&self) -> u64 {
        self.inner.samples()
    }

    /// Prediction error of the last sample.
    #[getter]
    fn last_error(&self) -> Option<f64> {
        self.inner.last_step().map(|s| s.e)
    }

    fn params(&self) -> PyArmaxParams {
        PyArmaxParams { inner: self.inner.params() }
    }
}

/// Model-free state estimates over a record: dict with `x_hat` (one list
/// per sample, from outputs before it), `e`, `y_hat` and the final `theta`.
#[pyfunction]
#[pyo3(signature = (u, y, n, m, p, p0 = armax::online::DEFAULT_P0))]
fn estimate_states<'py>(py: Python<'py>, u: Vec<f64>, y: Vec<f64>, n: usize, m: usize, p: usize, p0: f64) -> PyResult<Bound<'py, PyDict>> {
    let traj = trajectory(u, y)?;
    let run = armax::harness::experiment::estimate_trajectory(&traj, (n, m, p), p0).map_err(py_err)?;
    let d = PyDict::new(py);
    d.set_item("x_hat", run.x_hat.iter().map(|x| x.iter().copied().collect::<Vec<_>>()).collect::<Vec<_>>())?;
    d.set_item("e", &run.e)?;
    d.set_item("y_hat", &run.y_hat)?;
    d.set_item("theta", run.estimator.ident.theta().iter().copied().collect::<Vec<_>>())?;
    Ok(d)
}

/// Discounted DARE by value iteration from `P0 = I`; returns `(P, K)` with
/// the control law `u = −K x`.
#[pyfunction]
#[pyo3(signature = (a, b1, q, r, gamma, tol = armax::lqg::DARE_TOL, max_iter = armax::lqg::DARE_MAX_ITER))]
fn dare_solve(
    a: Vec<Vec<f64>>,
    b1: Vec<Vec<f64>>,
    q: Vec<Vec<f64>>,
    r: f64,
    gamma: f64,
    tol: f64,
    max_iter: usize,
) -> PyResult<(Vec<Vec<f64>>, Vec<Vec<f64>>)> {
    let a = to_matrix(&a)?;
    let p0 = DMatrix::identity(a.nrows(), a.nrows());
    let sol = armax::dare_solve(&a, &to_matrix(&b1)?, &to_matrix(&q)?, r, gamma, &p0, tol, max_iter).map_err(py_err)?;
    Ok((to_rows(&sol.p), to_rows(&sol.k)))
}

/// Runs an experiment from its JSON config; writes artifacts to `out` if
/// given and returns the report as JSON text.
#[pyfunction]
#[pyo3(signature = (config_json, out = None))]
fn run_experiment(py: Python<'_>, config_json: &str, out: Option<std::path::PathBuf>) -> PyResult<String> {
    let config = ExperimentConfig::from_json(config_json).map_err(py_err)?;
    let report = py.detach(|| run_config(&config, out.as_deref())).map_err(py_err)?;
    serde_json::to_string(&report).map_err(|e| PyValueError::new_err(e.to_string()))
}

/// Adds every class and function to `m`.
pub fn register(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyArmaxParams>()?;
    m.add_class::<PyOnlineIdentifier>()?;
    m.add_function(wrap_pyfunction!(simulate, m)?)?;
    m.add_function(wrap_pyfunction!(identify_offline, m)?)?;
    m.add_function(wrap_pyfunction!(estimate_states, m)?)?;
    m.add_function(wrap_pyfunction!(dare_solve, m)?)?;
    m.add_function(wrap_pyfunction!(run_experiment, m)?)?;
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    Ok(())
}

#[pymodule]
#[pyo3(name = "armax")]
fn armax_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    register(m)
}
