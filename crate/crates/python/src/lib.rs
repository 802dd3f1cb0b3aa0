//! Python bindings: closed-form solve, direct minimization, rearrangement and
//! the analysis checks. Reports that are JSON in the CLI come back as dicts.

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;
use serde::Serialize;

use l1sphere::analysis::{ScanConfig, Source};
use l1sphere::direct::SolverOptions;
use l1sphere::{Error, RadialGrid, RadialProfile};

fn py_err(e: Error) -> PyErr {
    match e {
        Error::InvalidParameter { .. }
        | Error::InvalidGrid(_)
        | Error::InvalidProfile(_)
        | Error::InsufficientData(_) => PyValueError::new_err(e.to_string()),
        _ => PyRuntimeError::new_err(e.to_string()),
    }
}

fn to_dict<'py, T: Serialize>(py: Python<'py>, value: &T) -> PyResult<Bound<'py, PyAny>> {
    let text = serde_json::to_string(value).map_err(|e| PyRuntimeError::new_err(e.to_string()))?;
    py.import_bound("json")?.call_method1("loads", (text,))
}

/// Closed-form minimizer parameters for one beta.
#[pyclass(name = "MinimizerParams", frozen)]
#[derive(Clone)]
struct PyParams(l1sphere::MinimizerParams);

#[pymethods]
impl PyParams {
    #[getter]
    fn beta(&self) -> f64 {
        self.0.beta
    }
    #[getter]
    fn a(&self) -> f64 {
        self.0.a
    }
    #[getter]
    fn mu(&self) -> f64 {
        self.0.mu
    }
    #[getter(R)]
    fn radius(&self) -> f64 {
        self.0.radius
    }
    #[getter(lambda_)]
    fn lambda(&self) -> f64 {
        self.0.lambda
    }
    #[getter]
    fn t_star(&self) -> f64 {
        self.0.t_star
    }

    fn __call__(&self, r: f64) -> f64 {
        self.0.eval(r)
    }

    fn derivative(&self, r: f64) -> f64 {
        self.0.derivative(r)
    }

    /// Samples on `n` nodes of `[0, r_max]` (default `1.5 R`).
    #[pyo3(signature = (n=4096, r_max=None))]
    fn sample(&self, n: usize, r_max: Option<f64>) -> PyResult<PyProfile> {
        let grid = match r_max {
            Some(r) => RadialGrid::new(n, r),
            None => self.0.default_grid(n),
        }
        .map_err(py_err)?;
        Ok(PyProfile(l1sphere::sample(&self.0, &grid)))
    }

    fn boundary(&self, py: Python<'_>) -> PyResult<PyObject> {
        Ok(to_dict(py, &l1sphere::boundary_report(&self.0))?.unbind())
    }

    fn to_dict(&self, py: Python<'_>) -> PyResult<PyObject> {
        Ok(to_dict(py, &self.0)?.unbind())
    }

    fn __repr__(&self) -> String {
        format!(
            "MinimizerParams(beta={}, a={}, mu={}, R={})",
            self.0.beta, self.0.a, self.0.mu, self.0.radius
        )
    }
}

/// Radial profile sampled on a uniform grid over `[0, r_max]`.
#[pyclass(name = "Profile", frozen)]
#[derive(Clone)]
struct PyProfile(RadialProfile);

#[pymethods]
impl PyProfile {
    #[new]
    fn new(r_max: f64, values: Vec<f64>) -> PyResult<Self> {
        let grid = RadialGrid::new(values.len(), r_max).map_err(py_err)?;
        RadialProfile::new(grid, values).map(Self).map_err(py_err)
    }

    #[staticmethod]
    fn load_csv(path: &str) -> PyResult<Self> {
        RadialProfile::load_csv(path).map(Self).map_err(py_err)
    }

    fn save_csv(&self, path: &str) -> PyResult<()> {
        self.0.save_csv(path).map_err(py_err)
    }

    #[getter]
    fn r(&self) -> Vec<f64> {
        self.0.grid().nodes().to_vec()
    }

    #[getter]
    fn values(&self) -> Vec<f64> {
        self.0.values().to_vec()
    }

    #[getter]
    fn r_max(&self) -> f64 {
        self.0.grid().r_max()
    }

    fn __len__(&self) -> usize {
        self.0.grid().n()
    }

    fn l1(&self) -> f64 {
        l1sphere::l1_norm(&self.0)
    }

    fn l2(&self) -> f64 {
        l1sphere::l2_norm(&self.0)
    }

    fn kinetic(&self) -> f64 {
        l1sphere::kinetic_energy(&self.0)
    }

    /// Energy breakdown of `F_beta` as a dict.
    fn energy(&self, py: Python<'_>, beta: f64) -> PyResult<PyObject> {
        let e = l1sphere::evaluate_functional(&self.0, beta).map_err(py_err)?;
        Ok(to_dict(py, &e)?.unbind())
    }

    fn scaled(&self, c: f64) -> PyResult<Self> {
        self.0.scaled(c).map(Self).map_err(py_err)
    }

    /// Symmetric decreasing rearrangement.
    fn rearranged(&self) -> Self {
        Self(l1sphere::rearrange(&self.0))
    }

    fn __repr__(&self) -> String {
        format!(
            "Profile(n={}, r_max={})",
            self.0.grid().n(),
            self.0.grid().r_max()
        )
    }
}

#[pyfunction]
fn geometry_constant() -> f64 {
    l1sphere::geometry_constant()
}

#[pyfunction]
#[pyo3(signature = (beta, tol=1e-13))]
fn solve_parameters(beta: f64, tol: f64) -> PyResult<PyParams> {
    l1sphere::solve_parameters(beta, tol)
        .map(PyParams)
        .map_err(py_err)
}

#[pyfunction]
fn helmholtz_residual(profile: &PyProfile, params: &PyParams) -> f64 {
    l1sphere::helmholtz_residual(&profile.0, &params.0)
}

/// Returns `(profile, report)`; `report` holds the energy breakdown and the
/// solver status.
#[pyfunction]
#[pyo3(signature = (
    beta, n=2048, r_max=None, *, step=None, max_iters=5_000_000, energy_tol=1e-4,
    rearrange_every=1000, check_every=1000, seed=0, perturbation=0.0,
))]
#[allow(clippy::too_many_arguments)]
fn minimize(
    py: Python<'_>,
    beta: f64,
    n: usize,
    r_max: Option<f64>,
    step: Option<f64>,
    max_iters: usize,
    energy_tol: f64,
    rearrange_every: usize,
    check_every: usize,
    seed: u64,
    perturbation: f64,
) -> PyResult<(PyProfile, PyObject)> {
    let opts = SolverOptions {
        step,
        max_iters,
        energy_tol,
        rearrange_every,
        seed,
        perturbation,
        check_every,
    };
    let r_max = match r_max {
        Some(r) => r,
        None => {
            2.0 * l1sphere::solve_parameters(beta, 1e-13)
                .map_err(py_err)?
                .radius
        }
    };
    let grid = RadialGrid::new(n, r_max).map_err(py_err)?;
    let out = py
        .allow_threads(|| l1sphere::minimize(beta, &grid, &opts))
        .map_err(py_err)?;
    let report = PyDict::new_bound(py);
    report.set_item("energy", to_dict(py, &out.energy)?)?;
    report.set_item("iterations", out.trace.iterations)?;
    report.set_item("converged", out.trace.converged)?;
    report.set_item("violations", out.trace.violations)?;
    Ok((PyProfile(out.profile), report.into_any().unbind()))
}

#[pyfunction]
fn rearrange(profile: &PyProfile) -> PyProfile {
    profile.rearranged()
}

#[pyfunction]
fn check_lemma1(py: Python<'_>, profile: &PyProfile, beta: f64) -> PyResult<PyObject> {
    let rep = l1sphere::check_lemma1(&profile.0, beta).map_err(py_err)?;
    Ok(to_dict(py, &rep)?.unbind())
}

#[pyfunction]
fn virial_check(py: Python<'_>, profile: &PyProfile, beta: f64) -> PyResult<PyObject> {
    let rep = l1sphere::virial_check(&profile.0, beta).map_err(py_err)?;
    Ok(to_dict(py, &rep)?.unbind())
}

#[pyfunction]
fn nash_ratio(profile: &PyProfile) -> PyResult<f64> {
    l1sphere::nash_ratio(&profile.0).map_err(py_err)
}

#[pyfunction]
fn rescale_unitary(profile: &PyProfile, nu: f64) -> PyResult<PyProfile> {
    l1sphere::rescale_unitary(&profile.0, nu)
        .map(PyProfile)
        .map_err(py_err)
}

/// Scaling report as a dict; `source` is `"closed_form"` or `"direct"`.
#[pyfunction]
#[pyo3(signature = (betas, source="closed_form", n=None))]
fn scaling_scan(
    py: Python<'_>,
    betas: Vec<f64>,
    source: &str,
    n: Option<usize>,
) -> PyResult<PyObject> {
    let source = match source {
        "closed_form" => Source::ClosedForm,
        "direct" => Source::Direct,
        other => return Err(PyValueError::new_err(format!("unknown source {other:?}"))),
    };
    let mut cfg = ScanConfig::default();
    if let Some(n) = n {
        cfg.n = n;
    }
    let rep = py
        .allow_threads(|| l1sphere::scaling_scan(&betas, source, &cfg))
        .map_err(py_err)?;
    Ok(to_dict(py, &rep)?.unbind())
}

#[pymodule]
#[pyo3(name = "l1sphere")]
fn l1sphere_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyParams>()?;
    m.add_class::<PyProfile>()?;
    m.add_function(wrap_pyfunction!(geometry_constant, m)?)?;
    m.add_function(wrap_pyfunction!(solve_parameters, m)?)?;
    m.add_function(wrap_pyfunction!(helmholtz_residual, m)?)?;
    m.add_function(wrap_pyfunction!(minimize, m)?)?;
    m.add_function(wrap_pyfunction!(rearrange, m)?)?;
    m.add_function(wrap_pyfunction!(check_lemma1, m)?)?;
    m.add_function(wrap_pyfunction!(virial_check, m)?)?;
    m.add_function(wrap_pyfunction!(nash_ratio, m)?)?;
    m.add_function(wrap_pyfunction!(rescale_unitary, m)?)?;
    m.add_function(wrap_pyfunction!(scaling_scan, m)?)?;
    Ok(())
}
