//! Python bindings for the cconvex library.
//!
//! Points are passed as `(chart, [coords])` tuples, matrices as lists of
//! rows. Structured results (certificates, transport reports, transform
//! data) are returned as JSON strings; parse them with `json.loads`.

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;

use cconvex::certifier::{self, CertificateKind, CertifyOptions};
use cconvex::field::{FieldExpression, ScalarField};
use cconvex::geometry::{ChartPoint, GridSpec, ManifoldModel};
use cconvex::mechanics::{CotangentState, MechanicalSystem};
use cconvex::riccati;
use cconvex::transport;
use nalgebra::{DMatrix, DVector};

fn to_py_err(e: cconvex::Error) -> PyErr {
    use cconvex::Error::*;
    match e {
        InvalidArgument(_) | Precondition(_) | Config(_) | Domain(_) | CotDomain { .. } => {
            PyValueError::new_err(e.to_string())
        }
        _ => PyRuntimeError::new_err(e.to_string()),
    }
}

type PyPoint = (u8, Vec<f64>);

fn point_from(p: &PyPoint) -> ChartPoint {
    ChartPoint::new(p.0, p.1.clone())
}

fn point_into(p: &ChartPoint) -> PyPoint {
    (p.chart, p.coords.iter().copied().collect())
}

fn matrix_from(rows: &[Vec<f64>]) -> PyResult<DMatrix<f64>> {
    let n = rows.len();
    if n == 0 || rows.iter().any(|r| r.len() != n) {
        return Err(PyValueError::new_err("matrix must be square and non-empty"));
    }
    Ok(DMatrix::from_fn(n, n, |i, j| rows[i][j]))
}

fn matrix_into(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| m[(i, j)]).collect())
        .collect()
}

fn json_of<T: serde::Serialize>(value: &T) -> PyResult<String> {
    serde_json::to_string_pretty(value).map_err(|e| PyRuntimeError::new_err(e.to_string()))
}

/// A model manifold: flat torus, round sphere, or truncated Poincaré disk.
#[pyclass(module = "cconvex_py", skip_from_py_object)]
#[derive(Clone)]
struct Manifold {
    inner: ManifoldModel,
}

#[pymethods]
impl Manifold {
    /// Manifold("flat_torus", periods=[1.0]) / ("sphere2", radius=1.0)
    /// / ("hyperbolic2", scale=1.0)
    #[new]
    #[pyo3(signature = (kind, periods=None, radius=None, scale=None))]
    fn new(
        kind: &str,
        periods: Option<Vec<f64>>,
        radius: Option<f64>,
        scale: Option<f64>,
    ) -> PyResult<Self> {
        let inner = match kind {
            "flat_torus" => ManifoldModel::FlatTorus {
                periods: periods
                    .ok_or_else(|| PyValueError::new_err("flat_torus requires periods"))?,
            },
            "sphere2" => ManifoldModel::Sphere2 { radius: radius.unwrap_or(1.0) },
            "hyperbolic2" => ManifoldModel::Hyperbolic2 { scale: scale.unwrap_or(1.0) },
            other => return Err(PyValueError::new_err(format!("unknown manifold kind `{other}`"))),
        };
        inner.validate().map_err(to_py_err)?;
        Ok(Manifold { inner })
    }

    #[getter]
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    #[getter]
    fn curvature_bound(&self) -> f64 {
        self.inner.curvature_bound()
    }

    #[getter]
    fn is_compact(&self) -> bool {
        self.inner.is_compact()
    }

    fn distance(&self, x: PyPoint, y: PyPoint) -> PyResult<f64> {
        self.inner
            .distance(&point_from(&x), &point_from(&y))
            .map_err(to_py_err)
    }

    fn metric(&self, x: PyPoint) -> PyResult<Vec<Vec<f64>>> {
        let (g, _) = self.inner.metric_at(&point_from(&x)).map_err(to_py_err)?;
        Ok(matrix_into(&g))
    }

    fn __repr__(&self) -> String {
        format!("Manifold({:?})", self.inner)
    }
}

/// A natural mechanical system: a manifold plus a potential from the field
/// expression library.
#[pyclass(module = "cconvex_py", skip_from_py_object)]
#[derive(Clone)]
struct System {
    inner: MechanicalSystem,
}

fn field_of(expression: &str, amplitude: f64) -> PyResult<ScalarField> {
    Ok(ScalarField::new(
        FieldExpression::parse(expression).map_err(to_py_err)?,
        amplitude,
    ))
}

#[pymethods]
impl System {
    #[new]
    #[pyo3(signature = (manifold, potential="zero", amplitude=0.0))]
    fn new(manifold: &Manifold, potential: &str, amplitude: f64) -> PyResult<Self> {
        let inner = MechanicalSystem::new(manifold.inner.clone(), field_of(potential, amplitude)?)
            .map_err(to_py_err)?;
        Ok(System { inner })
    }

    #[getter]
    fn hess_potential_bound(&self) -> f64 {
        self.inner.hess_potential_bound
    }

    fn hamiltonian(&self, x: PyPoint, p: Vec<f64>) -> PyResult<f64> {
        let state = CotangentState::new(point_from(&x), DVector::from_vec(p));
        self.inner.hamiltonian(&state).map_err(to_py_err)
    }

    /// Integrates the flow; returns (times, points, momenta, energy_drift).
    #[pyo3(signature = (x, p, t_end=1.0, step=1e-3))]
    #[allow(clippy::type_complexity)]
    fn flow(
        &self,
        x: PyPoint,
        p: Vec<f64>,
        t_end: f64,
        step: f64,
    ) -> PyResult<(Vec<f64>, Vec<PyPoint>, Vec<Vec<f64>>, f64)> {
        let state = CotangentState::new(point_from(&x), DVector::from_vec(p));
        let flow = self.inner.flow(&state, t_end, step).map_err(to_py_err)?;
        Ok((
            flow.times.clone(),
            flow.states.iter().map(|s| point_into(&s.position)).collect(),
            flow.states
                .iter()
                .map(|s| s.momentum.iter().copied().collect())
                .collect(),
            flow.energy_drift,
        ))
    }

    /// Minimal-action transport cost between two points.
    fn cost(&self, x: PyPoint, y: PyPoint) -> PyResult<f64> {
        self.inner
            .cost(&point_from(&x), &point_from(&y))
            .map_err(to_py_err)
    }

    /// Image points of the candidate map x ↦ π(φ₁(df_x)).
    fn build_map(
        &self,
        expression: &str,
        amplitude: f64,
        points: Vec<PyPoint>,
    ) -> PyResult<Vec<PyPoint>> {
        let f = field_of(expression, amplitude)?;
        let pts: Vec<ChartPoint> = points.iter().map(point_from).collect();
        let images = transport::build_map_strict(&self.inner, &f, &pts).map_err(to_py_err)?;
        Ok(images.iter().map(point_into).collect())
    }

    /// Runs a certifier ("natural", "riemannian", "two_dim", "general");
    /// returns the certificate as a JSON string.
    #[pyo3(signature = (theorem, expression, amplitude, grid=64, k=None, margin=1e-9))]
    fn certify(
        &self,
        theorem: &str,
        expression: &str,
        amplitude: f64,
        grid: usize,
        k: Option<f64>,
        margin: f64,
    ) -> PyResult<String> {
        let kind = match theorem {
            "natural" => CertificateKind::Natural,
            "riemannian" => CertificateKind::Riemannian,
            "two_dim" => CertificateKind::TwoDim,
            "general" => CertificateKind::General,
            other => return Err(PyValueError::new_err(format!("unknown theorem `{other}`"))),
        };
        let cert = certifier::certify(
            kind,
            &self.inner,
            &field_of(expression, amplitude)?,
            &GridSpec::new(grid),
            k,
            &CertifyOptions { margin },
        )
        .map_err(to_py_err)?;
        json_of(&cert)
    }

    /// Discrete double transform on a grid; returns JSON.
    #[pyo3(signature = (expression, amplitude, grid=64))]
    fn c_transform(&self, expression: &str, amplitude: f64, grid: usize) -> PyResult<String> {
        let result = transport::c_transform(
            &self.inner,
            &field_of(expression, amplitude)?,
            &GridSpec::new(grid),
        )
        .map_err(to_py_err)?;
        json_of(&result)
    }

    /// Empirical optimality verification; returns the report as JSON.
    #[pyo3(signature = (expression, amplitude, samples=100, seed=7))]
    fn verify_optimality(
        &self,
        expression: &str,
        amplitude: f64,
        samples: usize,
        seed: u64,
    ) -> PyResult<String> {
        let report = transport::verify_optimality(
            &self.inner,
            &field_of(expression, amplitude)?,
            samples,
            seed,
            None,
        )
        .map_err(to_py_err)?;
        json_of(&report)
    }

    fn __repr__(&self) -> String {
        format!(
            "System(model={:?}, potential={}, amplitude={})",
            self.inner.model,
            self.inner.potential.expression.name(),
            self.inner.potential.amplitude
        )
    }
}

/// Explicit constant-coefficient Riccati solution Γ₁(t) Γ₂(t)⁻¹.
#[pyfunction]
fn riccati_explicit_constant(k: f64, s0: Vec<Vec<f64>>, t: f64) -> PyResult<Vec<Vec<f64>>> {
    let m = riccati::riccati_explicit_constant(k, &matrix_from(&s0)?, t).map_err(to_py_err)?;
    Ok(matrix_into(&m))
}

/// Explicit block solution with a free first direction.
#[pyfunction]
fn riccati_explicit_block(
    k: f64,
    grad_norm: f64,
    s0: Vec<Vec<f64>>,
    t: f64,
) -> PyResult<Vec<Vec<f64>>> {
    let m = riccati::riccati_explicit_block(k, grad_norm, &matrix_from(&s0)?, t)
        .map_err(to_py_err)?;
    Ok(matrix_into(&m))
}

/// Integrates the constant-coefficient equation; returns
/// (times, final_matrix, blow_up_time_or_None).
#[pyfunction]
#[pyo3(signature = (k, s0, t_end=1.0, step=1e-3))]
#[allow(clippy::type_complexity)]
fn riccati_integrate(
    k: Vec<Vec<f64>>,
    s0: Vec<Vec<f64>>,
    t_end: f64,
    step: f64,
) -> PyResult<(Vec<f64>, Vec<Vec<f64>>, Option<f64>)> {
    let coeff = matrix_from(&k)?;
    let traj = riccati::riccati_integrate(move |_| coeff.clone(), &matrix_from(&s0)?, t_end, step)
        .map_err(to_py_err)?;
    Ok((
        traj.times.clone(),
        matrix_into(traj.final_matrix()),
        traj.blow_up,
    ))
}

/// Threshold profile λ·coth(λ) / 1 / λ·cot(λ) by curvature sign.
#[pyfunction]
fn threshold_xi(lambda: f64, sign_k: i8) -> PyResult<f64> {
    certifier::threshold_xi(lambda, sign_k).map_err(to_py_err)
}

/// Uniform seeded sample of points on a manifold.
#[pyfunction]
fn sample_uniform(manifold: &Manifold, n: usize, seed: u64) -> Vec<PyPoint> {
    transport::sample_uniform(&manifold.inner, n, seed)
        .iter()
        .map(point_into)
        .collect()
}

#[pymodule]
fn cconvex_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Manifold>()?;
    m.add_class::<System>()?;
    m.add_function(wrap_pyfunction!(riccati_explicit_constant, m)?)?;
    m.add_function(wrap_pyfunction!(riccati_explicit_block, m)?)?;
    m.add_function(wrap_pyfunction!(riccati_integrate, m)?)?;
    m.add_function(wrap_pyfunction!(threshold_xi, m)?)?;
    m.add_function(wrap_pyfunction!(sample_uniform, m)?)?;
    Ok(())
}
