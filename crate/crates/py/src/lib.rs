//! Python bindings: bodies, speeds, flow runs and the verification suites.

use std::collections::BTreeMap;
use std::path::Path;
use std::sync::Arc;

use pyo3::exceptions::{PyIOError, PyRuntimeError, PyValueError};
use pyo3::prelude::*;

use curvflow::config::{build_shape, check_initial};
use curvflow::flow::{rescale, sandwich_check, volume_decay_check};
use curvflow::geometry::{diskant_bounds, direct_radii, mixed_volumes};
use curvflow::verify::all_suites;
use curvflow::{curvature, pinching_status, Error, Flow, FlowConfig, RunStatus, Snapshot};

fn py_err(e: Error) -> PyErr {
    match e {
        Error::Io(_) | Error::Json(_) | Error::Csv(_) => PyIOError::new_err(e.to_string()),
        Error::Solver(_) => PyRuntimeError::new_err(e.to_string()),
        _ => PyValueError::new_err(e.to_string()),
    }
}

/// A convex body given by its support function on the sphere grid.
#[pyclass(name = "SupportFunction", module = "curvflow_py")]
struct PySupport {
    inner: curvflow::SupportFunction,
}

#[pymethods]
impl PySupport {
    /// Parse `sphere r`, `ellipsoid a b [c]` (plus `+ Y(l,m)*amp` terms) or a snapshot path.
    #[staticmethod]
    #[pyo3(signature = (spec, dim = 2, degree = 16))]
    fn from_shape(spec: &str, dim: usize, degree: usize) -> PyResult<Self> {
        let grid = Arc::new(curvflow::SphereGrid::new(dim, degree).map_err(py_err)?);
        let inner = build_shape(spec, grid, Path::new(".")).map_err(py_err)?;
        Ok(Self { inner })
    }

    #[staticmethod]
    fn load(path: &str) -> PyResult<Self> {
        let inner = Snapshot::load(path).and_then(|s| s.body(None)).map_err(py_err)?;
        Ok(Self { inner })
    }

    fn save(&self, path: &str) -> PyResult<()> {
        Snapshot::capture(&self.inner, 0.0).save(path).map_err(py_err)
    }

    #[getter]
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    #[getter]
    fn degree(&self) -> usize {
        self.inner.grid().degree()
    }

    fn coefficients(&self) -> Vec<f64> {
        self.inner.coefficients().to_vec()
    }

    fn values(&self) -> Vec<f64> {
        self.inner.values().to_vec()
    }

    /// `V_0, …, V_{n+1}`.
    fn mixed_volumes(&self) -> PyResult<Vec<f64>> {
        let curv = curvature(&self.inner).map_err(py_err)?;
        Ok(mixed_volumes(&self.inner, &curv).v)
    }

    /// Inradius, circumradius and their Diskant bounds.
    fn radii(&self) -> PyResult<BTreeMap<String, f64>> {
        let r = direct_radii(&self.inner).map_err(py_err)?;
        let curv = curvature(&self.inner).map_err(py_err)?;
        let d = diskant_bounds(&mixed_volumes(&self.inner, &curv)).map_err(py_err)?;
        Ok(BTreeMap::from([
            ("r_minus".to_string(), r.r_minus),
            ("r_plus".to_string(), r.r_plus),
            ("diskant_lower".to_string(), d.lower),
            ("diskant_upper".to_string(), d.upper),
        ]))
    }

    /// `max ‖Å‖²/H²`.
    fn pinch_max(&self) -> PyResult<f64> {
        let curv = curvature(&self.inner).map_err(py_err)?;
        Ok(pinching_status(&curv, f64::INFINITY).map_err(py_err)?.max_ratio)
    }

    fn __repr__(&self) -> String {
        format!("SupportFunction(dim={}, degree={})", self.inner.dim(), self.inner.grid().degree())
    }
}

/// A speed parsed from `name[:k][,alpha=..][,delta0=..]`.
#[pyclass(name = "Speed", module = "curvflow_py")]
struct PySpeed {
    inner: curvflow::SpeedSpec,
}

#[pymethods]
impl PySpeed {
    #[new]
    fn new(spec: &str) -> PyResult<Self> {
        Ok(Self {
            inner: curvflow::SpeedSpec::parse(spec).map_err(py_err)?,
        })
    }

    #[getter]
    fn alpha(&self) -> f64 {
        self.inner.alpha()
    }

    fn delta0(&self, n: usize) -> f64 {
        self.inner.delta0(n)
    }

    /// Speed of the principal curvatures `kappa`.
    fn value(&self, kappa: Vec<f64>) -> f64 {
        self.inner.value(&kappa)
    }

    fn __repr__(&self) -> String {
        format!("Speed('{}')", self.inner.describe())
    }
}

/// A completed flow run.
#[pyclass(name = "Trajectory", module = "curvflow_py")]
struct PyTrajectory {
    inner: curvflow::Trajectory,
}

#[pymethods]
impl PyTrajectory {
    #[getter]
    fn t_hat(&self) -> f64 {
        self.inner.t_hat
    }

    #[getter]
    fn steps(&self) -> usize {
        self.inner.steps
    }

    #[getter]
    fn status(&self) -> String {
        match &self.inner.status {
            RunStatus::Threshold => "threshold".into(),
            RunStatus::Budget => "budget".into(),
            RunStatus::EndTime => "end_time".into(),
            RunStatus::ConeExit { .. } => "cone_exit".into(),
            RunStatus::StepFailure { .. } => "step_failure".into(),
        }
    }

    #[getter]
    fn p_hat(&self) -> Vec<f64> {
        self.inner.p_hat.to_vec()
    }

    fn __len__(&self) -> usize {
        self.inner.snapshots.len()
    }

    fn times(&self) -> Vec<f64> {
        self.inner.snapshots.iter().map(|s| s.t).collect()
    }

    fn r_minus(&self) -> Vec<f64> {
        self.inner.snapshots.iter().map(|s| s.radii.r_minus).collect()
    }

    fn r_plus(&self) -> Vec<f64> {
        self.inner.snapshots.iter().map(|s| s.radii.r_plus).collect()
    }

    fn pinch_max(&self) -> Vec<f64> {
        self.inner.snapshots.iter().map(|s| s.summary.pinch_max).collect()
    }

    fn body(&self, index: usize) -> PyResult<PySupport> {
        let snap = self
            .inner
            .snapshots
            .get(index)
            .ok_or_else(|| PyValueError::new_err(format!("snapshot {index} out of range")))?;
        Ok(PySupport {
            inner: snap.body.clone(),
        })
    }

    /// Largest `|s̃ − 1|` of the rescaled snapshot.
    fn rescaled_deviation(&self, index: usize) -> PyResult<f64> {
        Ok(rescale(&self.inner, index).map_err(py_err)?.max_deviation)
    }

    fn volume_decay_error(&self) -> PyResult<f64> {
        Ok(volume_decay_check(&self.inner).map_err(py_err)?.max_relative)
    }

    fn lifetime_sandwich(&self, slack: f64) -> bool {
        sandwich_check(&self.inner, slack).passed
    }
}

/// Run the flow from `body` until `r_−` falls to `stop_fraction` of its start.
#[pyfunction]
#[pyo3(signature = (body, speed, c_safe = 0.2, stop_fraction = 0.1, cadence = 10, end_time = None, max_steps = 1_000_000))]
fn simulate(
    py: Python<'_>,
    body: &PySupport,
    speed: &PySpeed,
    c_safe: f64,
    stop_fraction: f64,
    cadence: usize,
    end_time: Option<f64>,
    max_steps: usize,
) -> PyResult<PyTrajectory> {
    check_initial(&body.inner, &speed.inner).map_err(py_err)?;
    let mut cfg = FlowConfig::new(speed.inner.clone(), body.inner.grid().degree());
    cfg.c_safe = c_safe;
    cfg.stop_fraction = stop_fraction;
    cfg.cadence = cadence;
    cfg.end_time = end_time;
    cfg.max_steps = max_steps;
    let start = body.inner.clone();
    let dim = start.dim();
    let inner = py
        .detach(move || Flow::new(cfg, dim).and_then(|f| f.run(&start)))
        .map_err(py_err)?;
    Ok(PyTrajectory { inner })
}

/// Trajectory stored by `curvflow simulate`.
#[pyfunction]
fn load_trajectory(dir: &str) -> PyResult<PyTrajectory> {
    let (_, inner) = curvflow::io::load_trajectory(Path::new(dir)).map_err(py_err)?;
    Ok(PyTrajectory { inner })
}

/// `(name, violations, worst_margin)` for each pointwise suite in dimension `n`.
#[pyfunction]
#[pyo3(signature = (n, samples = 10_000, seed = 0))]
fn lemma_suites(py: Python<'_>, n: usize, samples: usize, seed: u64) -> PyResult<Vec<(String, usize, f64)>> {
    let reports = py.detach(|| all_suites(n, samples, seed)).map_err(py_err)?;
    Ok(reports
        .into_iter()
        .map(|r| (r.lemma, r.violations, r.worst_margin))
        .collect())
}

#[pymodule]
fn curvflow_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PySupport>()?;
    m.add_class::<PySpeed>()?;
    m.add_class::<PyTrajectory>()?;
    m.add_function(wrap_pyfunction!(simulate, m)?)?;
    m.add_function(wrap_pyfunction!(load_trajectory, m)?)?;
    m.add_function(wrap_pyfunction!(lemma_suites, m)?)?;
    Ok(())
}
