use std::sync::Arc;

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;

use jacobi2_core::catalog::{hilbert_coeffs, Library, Space};
use jacobi2_core::jacobi::{generator, generators, witt_all, JType};
use jacobi2_core::suite::{self, RunConfig};
use jacobi2_core::theta::{theta_const, ThetaChar};
use jacobi2_core::{Engine, Error, FourierSeries, GroupId, Rat, SymplecticMat, Value};

fn err(e: Error) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn group(s: &str) -> PyResult<GroupId> {
    s.parse().map_err(err)
}

/// A truncated Fourier expansion Σ a(n, r, m) e(nτ11 + rτ12 + mτ22) with exact coefficients.
#[pyclass(name = "Series", module = "jacobi2", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PySeries {
    inner: FourierSeries,
}

#[pymethods]
impl PySeries {
    #[getter]
    fn trunc(&self) -> u32 {
        self.inner.trunc()
    }

    #[getter]
    fn weight(&self) -> Option<String> {
        self.inner.weight.as_ref().map(|w| w.to_string())
    }

    /// Coefficient at the exponent (n, r, m), given as strings like "1/2" or ints.
    fn coeff(&self, n: &str, r: &str, m: &str) -> PyResult<String> {
        let p = |s: &str| s.parse::<Rat>().map_err(err);
        Ok(self.inner.coeff(&p(n)?, &p(r)?, &p(m)?).to_string())
    }

    /// List of (n, r, m, coefficient), all as strings, in a fixed order.
    fn terms(&self) -> Vec<(String, String, String, String)> {
        let d = self.inner.denom() as i64;
        let mut v: Vec<_> = self.inner.terms().map(|(k, c)| (*k, c.to_string())).collect();
        v.sort_by_key(|(k, _)| (k.a + k.c, k.a, k.b));
        v.into_iter()
            .map(|(k, c)| {
                let f = |x: i32| Rat::frac(x as i64, d).to_string();
                (f(k.a), f(k.b), f(k.c), c)
            })
            .collect()
    }

    fn is_zero(&self) -> bool {
        self.inner.is_zero()
    }

    /// Restriction to τ12 = 0.
    fn witt(&self) -> PySeries {
        PySeries { inner: self.inner.witt() }
    }

    fn leading_terms(&self) -> Vec<(String, String, String, String)> {
        self.inner
            .leading_terms()
            .into_iter()
            .map(|(e, c)| (e[0].to_string(), e[1].to_string(), e[2].to_string(), c.to_string()))
            .collect()
    }

    fn to_json(&self) -> String {
        self.inner.to_json().to_string()
    }

    fn __eq__(&self, other: &PySeries) -> bool {
        self.inner == other.inner
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    fn __repr__(&self) -> String {
        format!("Series(trunc={}, terms={})", self.inner.trunc(), self.inner.len())
    }
}

/// Evaluates named forms and S-expressions at a fixed truncation, caching shared subterms.
#[pyclass(name = "Engine", module = "jacobi2", frozen)]
struct PyEngine {
    inner: Arc<Engine>,
}

impl PyEngine {
    fn value(&self, expr: &str, scope: &str, matrix: Option<&str>) -> PyResult<Arc<Value>> {
        let e = Library::standard().parse(expr, scope).map_err(err)?;
        let m = match matrix {
            Some(name) => SymplecticMat::by_name(name).map_err(err)?,
            None => SymplecticMat::identity(),
        };
        self.inner.eval(&e, &m).map_err(err)
    }
}

#[pymethods]
impl PyEngine {
    #[new]
    fn new(trunc: u32) -> PyResult<PyEngine> {
        if trunc == 0 || trunc > suite::MAX_TRUNC {
            return Err(PyValueError::new_err(format!("trunc must lie in 1..={}", suite::MAX_TRUNC)));
        }
        Ok(PyEngine { inner: Arc::new(Engine::new(trunc)) })
    }

    #[getter]
    fn trunc(&self) -> u32 {
        self.inner.trunc()
    }

    /// Expansion of a scalar expression, optionally slashed by a named matrix (J, K, M1, M2, M3, ...).
    #[pyo3(signature = (expr, scope = "", matrix = None))]
    fn series(&self, py: Python<'_>, expr: &str, scope: &str, matrix: Option<&str>) -> PyResult<PySeries> {
        let v = py.detach(|| self.value(expr, scope, matrix))?;
        Ok(PySeries { inner: v.scalar().map_err(err)?.clone() })
    }

    /// The (u1², u1u2, u2²) components of a Sym²-valued expression.
    #[pyo3(signature = (expr, scope = "", matrix = None))]
    fn sym2(&self, py: Python<'_>, expr: &str, scope: &str, matrix: Option<&str>) -> PyResult<(PySeries, PySeries, PySeries)> {
        let v = py.detach(|| self.value(expr, scope, matrix))?;
        let h = v.sym2().map_err(err)?;
        Ok((PySeries { inner: h.h20.clone() }, PySeries { inner: h.h11.clone() }, PySeries { inner: h.h02.clone() }))
    }

    /// W applied to a scalar expression.
    #[pyo3(signature = (expr, scope = ""))]
    fn witt(&self, py: Python<'_>, expr: &str, scope: &str) -> PyResult<PySeries> {
        let e = Library::standard().parse(expr, scope).map_err(err)?;
        let s = py.detach(|| self.inner.witt(&e, &SymplecticMat::identity())).map_err(err)?;
        Ok(PySeries { inner: (*s).clone() })
    }

    /// Witt condition of a listed generator at every coset representative: [(matrix, passed)].
    fn witt_condition(&self, py: Python<'_>, group_id: &str, jtype: &str, name: &str) -> PyResult<Vec<(String, bool)>> {
        let g = group(group_id)?;
        let t: JType = jtype.parse().map_err(err)?;
        let p = generator(g, t, name).map_err(err)?;
        let out = py.detach(|| witt_all(&self.inner, &p)).map_err(err)?;
        Ok(out.into_iter().map(|w| (w.matrix.name().unwrap_or("M").to_string(), w.passed())).collect())
    }
}

/// Theta constant θ_m for a characteristic like "0110" (degree two) or "01" (degree one).
#[pyfunction]
fn theta(characteristic: &str, trunc: u32) -> PyResult<PySeries> {
    let m: ThetaChar = characteristic.parse().map_err(err)?;
    Ok(PySeries { inner: theta_const(&m, trunc).map_err(err)? })
}

/// Names in the form registry.
#[pyfunction]
fn names() -> Vec<String> {
    Library::standard().names().map(String::from).collect()
}

/// Generator names of a group and Jacobi type.
#[pyfunction]
fn generator_names(group_id: &str, jtype: &str) -> PyResult<Vec<(String, i64)>> {
    let t: JType = jtype.parse().map_err(err)?;
    Ok(generators(group(group_id)?, t).into_iter().map(|p| (p.name, p.weight)).collect())
}

/// Hilbert coefficients for weights 0..=k.
#[pyfunction]
fn hilbert(group_id: &str, space: &str, k: usize) -> PyResult<Vec<i64>> {
    let s: Space = space.parse().map_err(err)?;
    Ok(hilbert_coeffs(group(group_id)?, s, k))
}

/// Rank table as [(weight, predicted, in_scope, spanning, rank)] and the overall status.
#[pyfunction]
#[pyo3(signature = (group_id, space, k, trunc = 4, ceiling = 8))]
fn dims(py: Python<'_>, group_id: &str, space: &str, k: i64, trunc: u32, ceiling: u32) -> PyResult<(String, Vec<(i64, i64, i64, usize, usize)>)> {
    let g = group(group_id)?;
    let s: Space = space.parse().map_err(err)?;
    RunConfig { trunc, ceiling, ..RunConfig::default() }.validate().map_err(err)?;
    let pool = suite::EnginePool::default();
    let (_, rows, o) = py.detach(|| suite::dims_escalate(&pool, g, s, k, trunc, ceiling)).map_err(err)?;
    Ok((o.status.name().to_string(), rows.iter().map(|r| (r.weight, r.predicted, r.in_scope, r.spanning, r.rank)).collect()))
}

/// Run the checks matching the glob filters; returns the JSON report.
#[pyfunction]
#[pyo3(signature = (filters = Vec::new(), trunc = 4, ceiling = 8, jobs = None))]
fn verify(py: Python<'_>, filters: Vec<String>, trunc: u32, ceiling: u32, jobs: Option<usize>) -> PyResult<String> {
    let cfg = RunConfig { trunc, ceiling, filter: filters, jobs };
    let r = py.detach(|| suite::run(&cfg)).map_err(err)?;
    Ok(r.to_json())
}

#[pymodule]
fn jacobi2(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PySeries>()?;
    m.add_class::<PyEngine>()?;
    m.add_function(wrap_pyfunction!(theta, m)?)?;
    m.add_function(wrap_pyfunction!(names, m)?)?;
    m.add_function(wrap_pyfunction!(generator_names, m)?)?;
    m.add_function(wrap_pyfunction!(hilbert, m)?)?;
    m.add_function(wrap_pyfunction!(dims, m)?)?;
    m.add_function(wrap_pyfunction!(verify, m)?)?;
    Ok(())
}
