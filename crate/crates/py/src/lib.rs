//! Python bindings for the solver: order functions, temporal meshes, the
//! discrete fractional operator, quadrature oracles, and one-call solves of
//! the manufactured problem.
//!
//! Built as the extension module `vofem_py`; see `python/smoke_test.py` at
//! the workspace root for a usage tour.

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::{PyDict, PyList};

use vofem::femspace::{build_box_mesh, DiffusionTensor};
use vofem::fracops::{self, QuadConfig, ScalarFn};
use vofem::harness::{
    build_manufactured, run_convergence, ErrorMeter, ErrorNorm, ErrorObservable, SweepAxis,
    SweepPlan, SweepPoint,
};
use vofem::sparsela::SolverConfig;
use vofem::stepper::{solve_all, SpatialScheme, StepperOptions};
use vofem::tmesh;
use vofem::varorder;

fn to_py_err(err: vofem::Error) -> PyErr {
    match err {
        vofem::Error::InvalidParam { .. } | vofem::Error::Config(_) => {
            PyValueError::new_err(err.to_string())
        }
        _ => PyRuntimeError::new_err(err.to_string()),
    }
}

/// Time-dependent fractional order alpha(t).
#[pyclass(name = "VarOrder", frozen)]
struct PyVarOrder {
    inner: varorder::VarOrder,
}

#[pymethods]
impl PyVarOrder {
    /// Constant order.
    #[staticmethod]
    fn constant(order: f64) -> Self {
        PyVarOrder {
            inner: varorder::VarOrder::constant(order),
        }
    }

    /// Smooth transition from `alpha_start` at t=0 to `alpha_end` at t=1
    /// with vanishing derivative at both ends.
    #[staticmethod]
    fn smooth_transition(alpha_start: f64, alpha_end: f64) -> PyResult<Self> {
        Ok(PyVarOrder {
            inner: varorder::VarOrder::smooth_transition(alpha_start, alpha_end)
                .map_err(to_py_err)?,
        })
    }

    fn alpha(&self, t: f64) -> f64 {
        self.inner.alpha(t)
    }

    fn alpha_prime(&self, t: f64) -> f64 {
        self.inner.alpha_prime(t)
    }

    #[getter]
    fn alpha0(&self) -> f64 {
        self.inner.alpha0
    }

    #[getter]
    fn alpha1(&self) -> f64 {
        self.inner.alpha1
    }
}

/// Kinetic coefficient k(t).
#[pyclass(name = "Kinetic", frozen)]
struct PyKinetic {
    inner: varorder::Kinetic,
}

#[pymethods]
impl PyKinetic {
    #[staticmethod]
    fn constant(value: f64) -> Self {
        PyKinetic {
            inner: varorder::Kinetic::constant(value),
        }
    }

    fn k(&self, t: f64) -> f64 {
        self.inner.k(t)
    }

    #[getter]
    fn k_min(&self) -> f64 {
        self.inner.k_min
    }
}

/// Graded temporal mesh t_n = T (n/N)^r.
#[pyclass(name = "TimeMesh", frozen)]
struct PyTimeMesh {
    inner: tmesh::TimeMesh,
}

#[pymethods]
impl PyTimeMesh {
    #[staticmethod]
    fn graded(horizon: f64, steps: usize, grading: f64) -> PyResult<Self> {
        Ok(PyTimeMesh {
            inner: tmesh::TimeMesh::graded(horizon, steps, grading).map_err(to_py_err)?,
        })
    }

    #[staticmethod]
    fn uniform(horizon: f64, steps: usize) -> PyResult<Self> {
        Ok(PyTimeMesh {
            inner: tmesh::TimeMesh::uniform(horizon, steps).map_err(to_py_err)?,
        })
    }

    #[getter]
    fn nodes(&self) -> Vec<f64> {
        self.inner.nodes.clone()
    }

    #[getter]
    fn taus(&self) -> Vec<f64> {
        self.inner.taus.clone()
    }

    #[getter]
    fn steps(&self) -> usize {
        self.inner.steps
    }

    #[getter]
    fn grading(&self) -> f64 {
        self.inner.grading
    }
}

/// Probe the order/kinetic assumptions; returns a dict with `passed` and
/// a list of `(condition, t, value)` violations.
#[pyfunction]
#[pyo3(signature = (vo, kinetic, horizon=1.0, samples=64))]
fn check_assumptions<'py>(
    py: Python<'py>,
    vo: &PyVarOrder,
    kinetic: &PyKinetic,
    horizon: f64,
    samples: usize,
) -> PyResult<Bound<'py, PyDict>> {
    let report = varorder::check_assumptions(&vo.inner, &kinetic.inner, horizon, samples)
        .map_err(to_py_err)?;
    let out = PyDict::new(py);
    out.set_item("passed", report.passed)?;
    let violations = PyList::empty(py);
    for v in &report.violations {
        violations.append((v.condition, v.t, v.value))?;
    }
    out.set_item("violations", violations)?;
    Ok(out)
}

/// Convolution weights b^n_k of the discrete fractional operator; returns
/// `(alpha_n, [b^n_1 .. b^n_n])`.
#[pyfunction]
fn weight_row(mesh: &PyTimeMesh, vo: &PyVarOrder, n: usize) -> PyResult<(f64, Vec<f64>)> {
    let row = tmesh::weight_row(&mesh.inner, &vo.inner, n).map_err(to_py_err)?;
    Ok((row.alpha_n, row.weights))
}

/// Apply the discrete operator to a scalar history g(t_0)..g(t_n).
#[pyfunction]
fn discrete_caputo(
    history: Vec<f64>,
    mesh: &PyTimeMesh,
    vo: &PyVarOrder,
    n: usize,
) -> PyResult<f64> {
    tmesh::discrete_caputo(&history, &mesh.inner, &vo.inner, n).map_err(to_py_err)
}

fn wrap_callable(f: Py<PyAny>) -> impl Fn(f64) -> f64 + Send + Sync + 'static {
    move |t: f64| {
        Python::attach(|py| {
            f.call1(py, (t,))
                .and_then(|v| v.extract::<f64>(py))
                .expect("callable must accept one float and return a float")
        })
    }
}

/// Variable-order fractional integral of a Python callable at time t.
#[pyfunction]
#[pyo3(signature = (g, vo, t, rel_tol=1e-10))]
fn frac_integral(g: Py<PyAny>, vo: &PyVarOrder, t: f64, rel_tol: f64) -> PyResult<f64> {
    let f = ScalarFn::new(wrap_callable(g));
    fracops::frac_integral_vo(&f, &vo.inner, t, &QuadConfig::with_rel_tol(rel_tol))
        .map_err(to_py_err)
}

/// Variable-order Caputo derivative of order 1 - alpha(t); `dg` is the
/// derivative of `g`.
#[pyfunction]
#[pyo3(signature = (g, dg, vo, t, rel_tol=1e-10))]
fn caputo(g: Py<PyAny>, dg: Py<PyAny>, vo: &PyVarOrder, t: f64, rel_tol: f64) -> PyResult<f64> {
    let f = ScalarFn::with_derivative(wrap_callable(g), wrap_callable(dg));
    fracops::caputo_vo(&f, &vo.inner, t, &QuadConfig::with_rel_tol(rel_tol)).map_err(to_py_err)
}

/// Variable-order Riemann-Liouville derivative of order 1 - alpha(t).
#[pyfunction]
#[pyo3(signature = (g, dg, vo, t, rel_tol=1e-10))]
fn riemann_liouville(
    g: Py<PyAny>,
    dg: Py<PyAny>,
    vo: &PyVarOrder,
    t: f64,
    rel_tol: f64,
) -> PyResult<f64> {
    let f = ScalarFn::with_derivative(wrap_callable(g), wrap_callable(dg));
    fracops::riemann_liouville_vo(&f, &vo.inner, t, &QuadConfig::with_rel_tol(rel_tol))
        .map_err(to_py_err)
}

#[pyfunction]
fn gamma(x: f64) -> f64 {
    vofem::gamma::gamma(x)
}

/// Vertex/interior/simplex counts of the box mesh.
#[pyfunction]
fn box_mesh_counts(dim: usize, cells: usize) -> PyResult<(usize, usize, usize)> {
    let mesh = build_box_mesh(dim, cells).map_err(to_py_err)?;
    Ok((mesh.n_vertices(), mesh.n_interior(), mesh.n_simplices()))
}

fn parse_scheme(name: &str) -> PyResult<SpatialScheme> {
    match name {
        "consistent" => Ok(SpatialScheme::Consistent),
        "lumped" => Ok(SpatialScheme::LumpedCollocation),
        "lumped_quadrature" => Ok(SpatialScheme::LumpedQuadrature),
        _ => Err(PyValueError::new_err(format!(
            "scheme '{name}' is not consistent|lumped|lumped_quadrature"
        ))),
    }
}

fn auto_grading(alpha0: f64, grading: Option<f64>) -> f64 {
    grading.unwrap_or(if alpha0 == 1.0 { 1.0 } else { 2.0 / alpha0 })
}

/// Solve the manufactured problem u = t^alpha(t) prod sin(2 pi x_j) and
/// report errors and solver statistics.
#[pyfunction]
#[pyo3(signature = (dim, cells, steps, alpha0, alpha1, grading=None, kinetic=1.0,
                    diffusion=0.001, horizon=1.0, scheme="lumped", solver_tol=1e-11))]
#[allow(clippy::too_many_arguments)]
fn solve_manufactured<'py>(
    py: Python<'py>,
    dim: usize,
    cells: usize,
    steps: usize,
    alpha0: f64,
    alpha1: f64,
    grading: Option<f64>,
    kinetic: f64,
    diffusion: f64,
    horizon: f64,
    scheme: &str,
    solver_tol: f64,
) -> PyResult<Bound<'py, PyDict>> {
    let problem = build_manufactured(
        dim,
        varorder::VarOrder::smooth_transition(alpha0, alpha1).map_err(to_py_err)?,
        varorder::Kinetic::constant(kinetic),
        DiffusionTensor::isotropic(diffusion),
        horizon,
    )
    .map_err(to_py_err)?;
    let r = auto_grading(alpha0, grading);
    let mesh_x = build_box_mesh(dim, cells).map_err(to_py_err)?;
    let mesh_t = tmesh::TimeMesh::graded(horizon, steps, r).map_err(to_py_err)?;
    let meter = ErrorMeter::new(&mesh_x, &problem);
    let (spec, factors) = problem
        .instantiate(mesh_t, mesh_x, &QuadConfig::default())
        .map_err(to_py_err)?;
    let opts = StepperOptions {
        solver: SolverConfig::with_rel_tol(solver_tol),
        scheme: parse_scheme(scheme)?,
        ..StepperOptions::default()
    };
    let record = solve_all(&spec, &opts).map_err(to_py_err)?;
    let out = PyDict::new(py);
    out.set_item("grading", r)?;
    out.set_item(
        "sup_error",
        meter.sup_error(ErrorNorm::Nodal, &record, &factors),
    )?;
    out.set_item(
        "final_error",
        meter.final_error(ErrorNorm::Nodal, &record, &factors),
    )?;
    out.set_item(
        "iterations",
        record.per_step.iter().map(|d| d.iterations).sum::<usize>(),
    )?;
    out.set_item("wall_time_s", record.wall_time.as_secs_f64())?;
    Ok(out)
}

/// Run a temporal convergence sweep; returns a dict with `rows` of
/// `(steps, error, rate)` and the sweep metadata.
#[pyfunction]
#[pyo3(signature = (dim, cells, steps_list, alpha0, alpha1, grading=None, kinetic=1.0,
                    diffusion=0.001, horizon=1.0, scheme="lumped"))]
#[allow(clippy::too_many_arguments)]
fn temporal_convergence<'py>(
    py: Python<'py>,
    dim: usize,
    cells: usize,
    steps_list: Vec<usize>,
    alpha0: f64,
    alpha1: f64,
    grading: Option<f64>,
    kinetic: f64,
    diffusion: f64,
    horizon: f64,
    scheme: &str,
) -> PyResult<Bound<'py, PyDict>> {
    let problem = build_manufactured(
        dim,
        varorder::VarOrder::smooth_transition(alpha0, alpha1).map_err(to_py_err)?,
        varorder::Kinetic::constant(kinetic),
        DiffusionTensor::isotropic(diffusion),
        horizon,
    )
    .map_err(to_py_err)?;
    let r = auto_grading(alpha0, grading);
    let plan = SweepPlan {
        problem,
        axis: SweepAxis::Temporal,
        points: steps_list
            .iter()
            .map(|&steps| SweepPoint {
                steps,
                cells,
                grading: r,
            })
            .collect(),
        norm: ErrorNorm::Nodal,
        observable: ErrorObservable::FinalTime,
        quad: QuadConfig::default(),
        stepper: StepperOptions {
            scheme: parse_scheme(scheme)?,
            ..StepperOptions::default()
        },
        parallel: true,
    };
    let table = run_convergence(&plan).map_err(to_py_err)?;
    let out = PyDict::new(py);
    out.set_item("grading", r)?;
    let rows = PyList::empty(py);
    for row in &table.rows {
        rows.append((row.steps, row.error, row.rate))?;
    }
    out.set_item("rows", rows)?;
    out.set_item("csv", table.to_csv())?;
    Ok(out)
}

#[pymodule]
fn vofem_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyVarOrder>()?;
    m.add_class::<PyKinetic>()?;
    m.add_class::<PyTimeMesh>()?;
    m.add_function(wrap_pyfunction!(check_assumptions, m)?)?;
    m.add_function(wrap_pyfunction!(weight_row, m)?)?;
    m.add_function(wrap_pyfunction!(discrete_caputo, m)?)?;
    m.add_function(wrap_pyfunction!(frac_integral, m)?)?;
    m.add_function(wrap_pyfunction!(caputo, m)?)?;
    m.add_function(wrap_pyfunction!(riemann_liouville, m)?)?;
    m.add_function(wrap_pyfunction!(gamma, m)?)?;
    m.add_function(wrap_pyfunction!(box_mesh_counts, m)?)?;
    m.add_function(wrap_pyfunction!(solve_manufactured, m)?)?;
    m.add_function(wrap_pyfunction!(temporal_convergence, m)?)?;
    Ok(())
}
