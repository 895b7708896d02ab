//! Python bindings for the crflow core library.

use std::sync::Arc;

use num_complex::Complex64;
use pyo3::create_exception;
use pyo3::exceptions::{PyException, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyAny;
use serde::Serialize;

use crflow_core::bubble::{bubble as core_bubble, DEFAULT_BUBBLE_TOLERANCE};
use crflow_core::constants::{constant as core_constant, ConstantName};
use crflow_core::flow::{self, FlowOptions};
use crflow_core::geometry::{self, CRAutomorphism, HeisenbergPoint, SpherePoint};
use crflow_core::morse::{self, MorseData};
use crflow_core::normalization::{find_centering, shadow_of, CenteringOptions};
use crflow_core::scenario::{field_of_f, initial_factor, FSpec, ScenarioConfig, U0Spec};
use crflow_core::selftest::{run_selftest, SelfTestOptions};
use crflow_core::spectral;

create_exception!(crflow, CrflowError, PyException);

fn err(e: crflow_core::Error) -> PyErr {
    CrflowError::new_err(e.to_string())
}

/// Serializes through JSON so nested results arrive as plain dicts and lists.
fn to_py<T: Serialize>(py: Python<'_>, value: &T) -> PyResult<Py<PyAny>> {
    let text = serde_json::to_string(value).map_err(|e| PyValueError::new_err(e.to_string()))?;
    Ok(py.import("json")?.call_method1("loads", (text,))?.unbind())
}

fn from_py<T: serde::de::DeserializeOwned>(
    py: Python<'_>,
    value: &Bound<'_, PyAny>,
) -> PyResult<T> {
    let text: String = if let Ok(s) = value.extract::<String>() {
        s
    } else {
        py.import("json")?
            .call_method1("dumps", (value,))?
            .extract()?
    };
    serde_json::from_str(&text).map_err(|e| PyValueError::new_err(e.to_string()))
}

fn sphere_point(x: Vec<Complex64>) -> PyResult<SpherePoint> {
    SpherePoint::normalized(x).map_err(err)
}

/// Orthonormal sub-Laplacian eigenbasis of degree ≤ J on S^{2n+1} with its quadrature grid.
#[pyclass(module = "crflow", frozen)]
struct Basis {
    inner: Arc<spectral::Basis>,
}

#[pymethods]
impl Basis {
    #[new]
    fn new(n: usize, degree: usize) -> PyResult<Self> {
        Ok(Self {
            inner: Arc::new(spectral::Basis::build(n, degree).map_err(err)?),
        })
    }

    #[getter]
    fn n(&self) -> usize {
        self.inner.n
    }

    #[getter]
    fn degree(&self) -> usize {
        self.inner.degree
    }

    #[getter]
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    #[getter]
    fn node_count(&self) -> usize {
        self.inner.node_count()
    }

    #[getter]
    fn volume(&self) -> f64 {
        self.inner.volume
    }

    #[getter]
    fn eigenvalues(&self) -> Vec<f64> {
        self.inner.eigenvalues.clone()
    }

    #[getter]
    fn weights(&self) -> Vec<f64> {
        self.inner.weights.clone()
    }

    /// Grid nodes as lists of n+1 complex coordinates.
    fn nodes(&self) -> Vec<Vec<Complex64>> {
        (0..self.inner.node_count())
            .map(|k| self.inner.node(k).to_vec())
            .collect()
    }

    fn gram_defect(&self) -> f64 {
        self.inner.gram_defect()
    }

    fn __repr__(&self) -> String {
        format!(
            "Basis(n={}, J={}, dim={}, nodes={})",
            self.inner.n,
            self.inner.degree,
            self.inner.dim(),
            self.inner.node_count()
        )
    }
}

/// A band-limited function on the sphere.
#[pyclass(module = "crflow", frozen)]
struct Field {
    inner: spectral::Field,
}

#[pymethods]
impl Field {
    #[staticmethod]
    fn constant(basis: &Basis, value: f64) -> Self {
        Self {
            inner: spectral::Field::constant(basis.inner.clone(), value),
        }
    }

    /// Projection of samples given at the grid nodes.
    #[staticmethod]
    fn from_values(basis: &Basis, values: Vec<f64>) -> PyResult<Self> {
        if values.len() != basis.inner.node_count() {
            return Err(PyValueError::new_err("one value per grid node is required"));
        }
        Ok(Self {
            inner: spectral::Field::analyze(basis.inner.clone(), &values),
        })
    }

    #[staticmethod]
    fn from_coeffs(basis: &Basis, coeffs: Vec<f64>) -> PyResult<Self> {
        if coeffs.len() != basis.inner.dim() {
            return Err(PyValueError::new_err(
                "one coefficient per basis function is required",
            ));
        }
        Ok(Self {
            inner: spectral::Field::from_coeffs(basis.inner.clone(), coeffs),
        })
    }

    /// Curvature candidate from a preset or polynomial spec (dict or JSON string).
    #[staticmethod]
    #[pyo3(signature = (basis, spec, scale = 1.0))]
    fn curvature(
        py: Python<'_>,
        basis: &Basis,
        spec: &Bound<'_, PyAny>,
        scale: f64,
    ) -> PyResult<Self> {
        let spec: FSpec = from_py(py, spec)?;
        Ok(Self {
            inner: field_of_f(&basis.inner, &spec, scale).map_err(err)?,
        })
    }

    /// Initial factor from a u0 spec (dict or JSON string).
    #[staticmethod]
    #[pyo3(signature = (basis, spec, seed = 0))]
    fn initial(
        py: Python<'_>,
        basis: &Basis,
        spec: &Bound<'_, PyAny>,
        seed: u64,
    ) -> PyResult<Self> {
        let spec: U0Spec = from_py(py, spec)?;
        Ok(Self {
            inner: initial_factor(&basis.inner, &spec, seed).map_err(err)?,
        })
    }

    #[getter]
    fn basis(&self) -> Basis {
        Basis {
            inner: self.inner.basis().clone(),
        }
    }

    #[getter]
    fn coeffs(&self) -> Vec<f64> {
        self.inner.coeffs().to_vec()
    }

    #[getter]
    fn values(&self) -> Vec<f64> {
        self.inner.values().to_vec()
    }

    fn min(&self) -> f64 {
        self.inner.min()
    }

    fn max(&self) -> f64 {
        self.inner.max()
    }

    fn integrate(&self) -> f64 {
        self.inner.integrate()
    }

    fn eval(&self, x: Vec<Complex64>) -> PyResult<f64> {
        if x.len() != self.inner.n() + 1 {
            return Err(PyValueError::new_err(
                "point has the wrong number of coordinates",
            ));
        }
        Ok(self.inner.eval_at(&x))
    }

    fn sub_laplacian(&self) -> Self {
        Self {
            inner: self.inner.sub_laplacian(),
        }
    }

    fn scale(&self, s: f64) -> Self {
        Self {
            inner: self.inner.scale(s),
        }
    }

    fn __repr__(&self) -> String {
        format!(
            "Field(n={}, dim={}, min={:.6}, max={:.6})",
            self.inner.n(),
            self.inner.coeffs().len(),
            self.inner.min(),
            self.inner.max()
        )
    }
}

/// Webster curvature of u^{2/n}θ0 at the grid nodes.
#[pyfunction]
fn webster_curvature(u: &Field) -> PyResult<Vec<f64>> {
    Ok(flow::webster_curvature(&u.inner)
        .map_err(err)?
        .into_values())
}

#[pyfunction]
fn energy(u: &Field) -> f64 {
    flow::energy(&u.inner)
}

#[pyfunction]
fn energy_f(u: &Field, f: &Field) -> PyResult<f64> {
    flow::energy_f(&u.inner, &f.inner).map_err(err)
}

#[pyfunction]
fn alpha(u: &Field, f: &Field) -> PyResult<f64> {
    flow::alpha(&u.inner, &f.inner).map_err(err)
}

#[pyfunction]
fn flow_rhs(u: &Field, f: &Field) -> PyResult<Field> {
    Ok(Field {
        inner: flow::flow_rhs(&u.inner, &f.inner).map_err(err)?,
    })
}

/// Integrates the curvature flow from u0. Keyword options override the flow defaults.
#[pyclass(module = "crflow", frozen)]
struct Flow {
    inner: flow::Flow,
}

#[pymethods]
impl Flow {
    #[new]
    #[pyo3(signature = (f, options = None))]
    fn new(py: Python<'_>, f: &Field, options: Option<&Bound<'_, PyAny>>) -> PyResult<Self> {
        let opts = match options {
            Some(o) => {
                let mut base = serde_json::to_value(FlowOptions::default()).expect("plain data");
                let extra: serde_json::Value = from_py(py, o)?;
                if let (Some(b), Some(e)) = (base.as_object_mut(), extra.as_object()) {
                    for (k, v) in e {
                        if !b.contains_key(k) {
                            return Err(PyValueError::new_err(format!(
                                "unknown flow option {k:?}"
                            )));
                        }
                        b.insert(k.clone(), v.clone());
                    }
                }
                serde_json::from_value(base).map_err(|e| PyValueError::new_err(e.to_string()))?
            }
            None => FlowOptions::default(),
        };
        Ok(Self {
            inner: flow::Flow::new(f.inner.clone(), opts).map_err(err)?,
        })
    }

    fn beta(&self, py: Python<'_>) -> PyResult<Py<PyAny>> {
        to_py(py, &self.inner.beta().map_err(err)?)
    }

    fn diagnostics(&self, py: Python<'_>, u: &Field) -> PyResult<Py<PyAny>> {
        to_py(py, &self.inner.diagnostics(&u.inner, None).map_err(err)?)
    }

    /// Returns (summary dict, final factor).
    fn run(&self, py: Python<'_>, u0: &Field) -> PyResult<(Py<PyAny>, Field)> {
        let run = py
            .detach(|| self.inner.run(&u0.inner, |_| {}))
            .map_err(err)?;
        #[derive(Serialize)]
        struct Summary<'a> {
            status: flow::Termination,
            accepted_steps: usize,
            rejected_steps: usize,
            max_energy_increase: f64,
            t: f64,
            failure: Option<String>,
            records: &'a [flow::Record],
            shadow_report: &'a Option<flow::PointReport>,
        }
        let summary = Summary {
            status: run.status,
            accepted_steps: run.accepted_steps,
            rejected_steps: run.rejected_steps,
            max_energy_increase: run.max_energy_increase,
            t: run.final_state.t,
            failure: run.failure.as_ref().map(|e| e.to_string()),
            records: &run.records,
            shadow_report: &run.shadow_report,
        };
        Ok((
            to_py(py, &summary)?,
            Field {
                inner: run.final_state.u,
            },
        ))
    }
}

/// Bubble-expansion constant by adaptive Heisenberg quadrature.
#[pyfunction]
#[pyo3(signature = (name, n, level = 1))]
fn constant(py: Python<'_>, name: &str, n: usize, level: usize) -> PyResult<Py<PyAny>> {
    let name = ConstantName::parse(name)
        .ok_or_else(|| PyValueError::new_err(format!("unknown constant {name:?}")))?;
    to_py(py, &core_constant(name, n, level).map_err(err)?)
}

/// Standard bubble at p with scale eps, projected onto the basis.
#[pyfunction]
#[pyo3(signature = (p, eps, basis, tolerance = DEFAULT_BUBBLE_TOLERANCE))]
fn bubble(p: Vec<Complex64>, eps: f64, basis: &Basis, tolerance: f64) -> PyResult<Field> {
    let p = sphere_point(p)?;
    Ok(Field {
        inner: core_bubble(&p, eps, basis.inner.clone(), tolerance)
            .map_err(err)?
            .field,
    })
}

/// Cayley transform to the Heisenberg group: returns (z, tau).
#[pyfunction]
fn cayley_forward(x: Vec<Complex64>) -> PyResult<(Vec<Complex64>, f64)> {
    let h = geometry::cayley_forward(&sphere_point(x)?).map_err(err)?;
    Ok((h.z, h.tau))
}

#[pyfunction]
fn cayley_inverse(z: Vec<Complex64>, tau: f64) -> PyResult<Vec<Complex64>> {
    let h = HeisenbergPoint::new(z, tau).map_err(err)?;
    Ok(geometry::cayley_inverse(&h).x)
}

/// CR automorphism with pole p, Heisenberg translation (z, tau) and dilation r.
#[pyclass(module = "crflow", frozen)]
struct Automorphism {
    inner: CRAutomorphism,
}

#[pymethods]
impl Automorphism {
    #[new]
    #[pyo3(signature = (pole, r, z = None, tau = 0.0))]
    fn new(pole: Vec<Complex64>, r: f64, z: Option<Vec<Complex64>>, tau: f64) -> PyResult<Self> {
        let pole = sphere_point(pole)?;
        let n = pole.n();
        let q = HeisenbergPoint::new(z.unwrap_or_else(|| vec![Complex64::new(0.0, 0.0); n]), tau)
            .map_err(err)?;
        Ok(Self {
            inner: CRAutomorphism::with_pole(&pole, q, r).map_err(err)?,
        })
    }

    fn apply(&self, x: Vec<Complex64>) -> PyResult<Vec<Complex64>> {
        Ok(self.inner.apply(&sphere_point(x)?).map_err(err)?.x)
    }

    fn jacobian_factor(&self, x: Vec<Complex64>) -> PyResult<f64> {
        self.inner.jacobian_factor(&sphere_point(x)?).map_err(err)
    }

    fn inverse(&self) -> Self {
        Self {
            inner: self.inner.inverse(),
        }
    }

    /// (Θ, Θ̂, ε) of the automorphism.
    fn shadow(&self, py: Python<'_>) -> PyResult<Py<PyAny>> {
        to_py(py, &shadow_of(&self.inner))
    }

    #[getter]
    fn r(&self) -> f64 {
        self.inner.r
    }

    #[getter]
    fn pole(&self) -> Vec<Complex64> {
        self.inner.pole().x
    }
}

/// Centering automorphism of u: returns (Automorphism, residual, converged).
#[pyfunction]
fn centering(py: Python<'_>, u: &Field) -> PyResult<(Automorphism, f64, bool)> {
    let c = py
        .detach(|| {
            find_centering(
                &u.inner,
                u.inner.basis().clone(),
                &CenteringOptions::default(),
            )
        })
        .map_err(err)?;
    Ok((Automorphism { inner: c.phi }, c.residual, c.converged))
}

/// Theorem gate on critical-point data (dict or JSON string).
#[pyfunction]
fn theorem_gate(py: Python<'_>, data: &Bound<'_, PyAny>) -> PyResult<Py<PyAny>> {
    let data: MorseData = from_py(py, data)?;
    to_py(py, &morse::theorem_gate(&data).map_err(err)?)
}

#[pyfunction]
fn solve_k(m: Vec<i64>, n: usize) -> Option<Vec<i64>> {
    morse::solve_k(&m, n)
}

#[pyfunction]
fn sbc_check(f_max: f64, f_min: f64, n: usize) -> PyResult<bool> {
    morse::sbc_check(f_max, f_min, n).map_err(err)
}

/// Critical points of f found by Newton iteration from grid seeds.
#[pyfunction]
fn critical_points(py: Python<'_>, f: &Field) -> PyResult<Py<PyAny>> {
    let found =
        py.detach(|| morse::find_critical_points(&f.inner, &morse::FinderOptions::default()));
    to_py(py, &found)
}

/// Validates a scenario config (JSON string) and returns (f, u0) fields.
#[pyfunction]
fn load_scenario(text: &str) -> PyResult<(Field, Field)> {
    let cfg = ScenarioConfig::from_json(text).map_err(|e| PyValueError::new_err(e.to_string()))?;
    let s = cfg.prepare().map_err(err)?;
    Ok((Field { inner: s.f }, Field { inner: s.u0 }))
}

#[pyfunction]
fn selftest(py: Python<'_>) -> PyResult<Py<PyAny>> {
    let results = py.detach(|| run_selftest(&SelfTestOptions::default()));
    to_py(py, &results)
}

#[pymodule]
fn crflow(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("CrflowError", m.py().get_type::<CrflowError>())?;
    m.add_class::<Basis>()?;
    m.add_class::<Field>()?;
    m.add_class::<Flow>()?;
    m.add_class::<Automorphism>()?;
    m.add_function(wrap_pyfunction!(webster_curvature, m)?)?;
    m.add_function(wrap_pyfunction!(energy, m)?)?;
    m.add_function(wrap_pyfunction!(energy_f, m)?)?;
    m.add_function(wrap_pyfunction!(alpha, m)?)?;
    m.add_function(wrap_pyfunction!(flow_rhs, m)?)?;
    m.add_function(wrap_pyfunction!(constant, m)?)?;
    m.add_function(wrap_pyfunction!(bubble, m)?)?;
    m.add_function(wrap_pyfunction!(cayley_forward, m)?)?;
    m.add_function(wrap_pyfunction!(cayley_inverse, m)?)?;
    m.add_function(wrap_pyfunction!(centering, m)?)?;
    m.add_function(wrap_pyfunction!(theorem_gate, m)?)?;
    m.add_function(wrap_pyfunction!(solve_k, m)?)?;
    m.add_function(wrap_pyfunction!(sbc_check, m)?)?;
    m.add_function(wrap_pyfunction!(critical_points, m)?)?;
    m.add_function(wrap_pyfunction!(load_scenario, m)?)?;
    m.add_function(wrap_pyfunction!(selftest, m)?)?;
    Ok(())
}
