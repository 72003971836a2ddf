//! Python bindings: groups, projections, Pansu differentials and coarea runs.
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;

use carnot::coarea::{self as harness, CoareaConfig, Region};
use carnot::group::file::{dump_schema, parse_schema};
use carnot::maps::BuiltinMap;
use carnot::measure::{quasi_norm, CoordBox, QuadratureConfig};
use carnot::pansu::{self, DiffConfig};
use carnot::projection::{self, Integrand};
use carnot::{Error, Point};

fn py_err(e: Error) -> PyErr {
    match e {
        Error::Evaluation(_)
        | Error::NonConvergence(_)
        | Error::DifferentialBudget { .. }
        | Error::InconsistentCompletion(_)
        | Error::Io(_) => PyRuntimeError::new_err(e.to_string()),
        _ => PyValueError::new_err(e.to_string()),
    }
}

fn to_py_json<'py>(py: Python<'py>, value: &impl serde::Serialize) -> PyResult<Bound<'py, PyAny>> {
    let text = serde_json::to_string(value).map_err(|e| PyRuntimeError::new_err(e.to_string()))?;
    py.import("json")?.call_method1("loads", (text,))
}

/// A graded nilpotent group in exponential coordinates.
#[pyclass(frozen, skip_from_py_object)]
struct Group(carnot::Group);

#[pymethods]
impl Group {
    /// `heisenberg(n)`, `abelian(n)`, `free_step2(r)` or `engel`.
    #[staticmethod]
    fn builtin(name: &str) -> PyResult<Self> {
        carnot::Group::builtin(name).map(Group).map_err(py_err)
    }

    /// Parses a schema in TOML form and checks every invariant.
    #[staticmethod]
    fn from_toml(text: &str) -> PyResult<Self> {
        let schema = parse_schema(text).map_err(py_err)?;
        carnot::Group::new(schema).map(Group).map_err(py_err)
    }

    fn to_toml(&self) -> String {
        dump_schema(self.0.schema())
    }

    #[getter]
    fn name(&self) -> String {
        self.0.name().to_string()
    }

    #[getter]
    fn dim(&self) -> usize {
        self.0.dim()
    }

    #[getter]
    fn horizontal_dim(&self) -> usize {
        self.0.horizontal_dim()
    }

    #[getter]
    fn step(&self) -> usize {
        self.0.step()
    }

    #[getter]
    fn homogeneous_dim(&self) -> usize {
        self.0.homogeneous_dim()
    }

    #[getter]
    fn degrees(&self) -> Vec<usize> {
        self.0.degrees().to_vec()
    }

    fn mul(&self, x: Vec<f64>, y: Vec<f64>) -> PyResult<Vec<f64>> {
        self.0.mul(&Point::new(x), &Point::new(y)).map(Point::into_vec).map_err(py_err)
    }

    fn inverse(&self, x: Vec<f64>) -> PyResult<Vec<f64>> {
        self.0.check_dim(x.len()).map_err(py_err)?;
        Ok(self.0.inverse(&Point::new(x)).into_vec())
    }

    fn dilate(&self, lam: f64, x: Vec<f64>) -> PyResult<Vec<f64>> {
        self.0.dilate(lam, &Point::new(x)).map(Point::into_vec).map_err(py_err)
    }

    fn quasi_norm(&self, x: Vec<f64>) -> PyResult<f64> {
        quasi_norm(&self.0, &Point::new(x)).map_err(py_err)
    }

    /// Coordinates of `Pr_j(x)` with entry `j` removed; `j` is 0-based.
    fn proj_hyperplane(&self, x: Vec<f64>, j: usize) -> PyResult<Vec<f64>> {
        projection::proj_hyperplane(&self.0, &Point::new(x), j).map(|p| p.coords().to_vec()).map_err(py_err)
    }

    fn proj_scalar(&self, x: Vec<f64>, j: usize) -> PyResult<f64> {
        projection::proj_scalar(&self.0, &Point::new(x), j).map_err(py_err)
    }

    fn __repr__(&self) -> String {
        format!("Group({:?}, N={}, step={})", self.0.name(), self.0.dim(), self.0.step())
    }
}

/// A builtin contact map, e.g. `Map(g, "dilate:lambda=2")`.
#[pyclass(frozen)]
struct Map(BuiltinMap);

#[pymethods]
impl Map {
    #[new]
    fn new(group: &Group, spec: &str) -> PyResult<Self> {
        BuiltinMap::parse(&group.0, spec).map(Map).map_err(py_err)
    }

    fn __call__(&self, x: Vec<f64>) -> PyResult<Vec<f64>> {
        use carnot::maps::ContactMap;
        self.0.eval(&x).map_err(py_err)
    }

    fn __repr__(&self) -> String {
        use carnot::maps::ContactMap;
        format!("Map({:?})", self.0.name())
    }
}

/// The graded matrix of the Pansu differential of `phi` at `x`.
#[pyfunction]
fn pansu_differential(group: &Group, phi: &Map, x: Vec<f64>) -> PyResult<Vec<Vec<f64>>> {
    let l = pansu::pansu_differential(&group.0, &phi.0, &Point::new(x), &DiffConfig::default()).map_err(py_err)?;
    let m = l.matrix();
    Ok((0..m.nrows()).map(|r| m.row(r).iter().copied().collect()).collect())
}

/// `‖(adj D_H φ(x))_{·j}‖` restricted to the horizontal rows.
#[pyfunction]
fn coarea_factor(group: &Group, phi: &Map, x: Vec<f64>, j: usize) -> PyResult<f64> {
    pansu::coarea_factor(&group.0, &phi.0, &Point::new(x), j, &DiffConfig::default()).map_err(py_err)
}

fn region(group: &Group, lo: Vec<f64>, hi: Vec<f64>, translation: Option<Vec<f64>>) -> PyResult<Region> {
    let bx = CoordBox::new(lo, hi).map_err(py_err)?;
    match translation {
        Some(g) => Region::translated(&group.0, bx, g),
        None => Region::new(&group.0, bx),
    }
    .map_err(py_err)
}

/// Runs both sides of the coarea inequality on `g·[lo, hi]` and returns the
/// report as a dict. `j` is 0-based here; the report itself is 1-based.
#[pyfunction]
#[pyo3(signature = (group, phi, lo, hi, j, p_grid=64, quad=32, seed=0, translation=None))]
#[allow(clippy::too_many_arguments)]
fn verify_coarea<'py>(
    py: Python<'py>,
    group: &Group,
    phi: &Map,
    lo: Vec<f64>,
    hi: Vec<f64>,
    j: usize,
    p_grid: usize,
    quad: usize,
    seed: u64,
    translation: Option<Vec<f64>>,
) -> PyResult<Bound<'py, PyAny>> {
    let region = region(group, lo, hi, translation)?;
    let cfg = CoareaConfig { p_grid, quadrature: QuadratureConfig::Grid { n: quad }, seed, ..CoareaConfig::default() };
    let report = py.detach(|| harness::verify_coarea(&group.0, &phi.0, &region, j, &cfg)).map_err(py_err)?;
    to_py_json(py, &report)
}

/// Both sides of the Fubini decomposition of `∫ f` over `[lo, hi]`.
#[pyfunction]
#[pyo3(signature = (group, f, lo, hi, j, grid=64))]
fn fubini_check<'py>(
    py: Python<'py>,
    group: &Group,
    f: &str,
    lo: Vec<f64>,
    hi: Vec<f64>,
    j: usize,
    grid: usize,
) -> PyResult<Bound<'py, PyAny>> {
    let f = Integrand::parse(f).map_err(py_err)?;
    let bx = CoordBox::new(lo, hi).map_err(py_err)?;
    let report = py.detach(|| projection::fubini_check(&group.0, &f, &bx, j, grid)).map_err(py_err)?;
    to_py_json(py, &report)
}

#[pymodule]
#[pyo3(name = "carnot_coarea")]
fn carnot_module(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Group>()?;
    m.add_class::<Map>()?;
    m.add_function(wrap_pyfunction!(pansu_differential, m)?)?;
    m.add_function(wrap_pyfunction!(coarea_factor, m)?)?;
    m.add_function(wrap_pyfunction!(verify_coarea, m)?)?;
    m.add_function(wrap_pyfunction!(fubini_check, m)?)?;
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    Ok(())
}
