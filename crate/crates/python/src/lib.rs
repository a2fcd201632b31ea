//! Python bindings. Coordinates are 0-based, as usual in Python.

use std::collections::BTreeMap;

use compound_sums::closed::ClosedModel;
use compound_sums::closed_mn::cmn_pmf;
use compound_sums::closed_nmn::cnmn_pmf;
use compound_sums::compound::{compound_pgf, compound_pmf_table, conditional_pmf};
use compound_sums::montecarlo::{empirical_moments, sample_compound};
use compound_sums::verify::{self, Level};
use compound_sums::{CompoundModel, CountLaw, Error, MomentReport, SummandLaw};
use pyo3::exceptions::{PyValueError, PyZeroDivisionError};
use pyo3::prelude::*;
use pyo3::types::{PyDict, PyTuple};

fn to_py(e: Error) -> PyErr {
    match e {
        Error::ZeroProbabilityCondition(_) => PyZeroDivisionError::new_err(e.to_string()),
        _ => PyValueError::new_err(e.to_string()),
    }
}

fn report_dict<'py>(py: Python<'py>, r: &MomentReport) -> PyResult<Bound<'py, PyDict>> {
    let d = PyDict::new(py);
    d.set_item("mean", &r.mean)?;
    d.set_item("cov", &r.cov)?;
    d.set_item("cor", &r.cor)?;
    d.set_item("fisher_index", &r.fisher_index)?;
    d.set_item("cv", &r.cv)?;
    d.set_item("cov_with_n", &r.cov_with_n)?;
    d.set_item("cor_with_n", &r.cor_with_n)?;
    Ok(d)
}

/// Compound vector `X = Y_1 + ... + Y_N` with a multinomial or negative
/// multinomial summand, built from the same specs as the command line.
#[pyclass(name = "Model", frozen)]
struct PyModel {
    inner: CompoundModel,
}

impl PyModel {
    fn closed(&self) -> ClosedModel {
        ClosedModel::from(&self.inner)
    }
}

#[pymethods]
impl PyModel {
    #[new]
    fn new(count: &str, summand: &str) -> PyResult<Self> {
        let count: CountLaw = count.parse().map_err(to_py)?;
        let summand: SummandLaw = summand.parse().map_err(to_py)?;
        Ok(Self {
            inner: CompoundModel::new(count, summand),
        })
    }

    #[getter]
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    fn __repr__(&self) -> String {
        format!("Model('{}', '{}')", self.inner.count(), self.inner.summand())
    }

    fn __str__(&self) -> String {
        self.inner.to_string()
    }

    #[pyo3(signature = (x, eps = 1e-12))]
    fn pmf(&self, x: Vec<u64>, eps: f64) -> PyResult<f64> {
        if x.len() != self.inner.dim() {
            return Err(PyValueError::new_err(format!(
                "point has {} coordinates, model has {}",
                x.len(),
                self.inner.dim()
            )));
        }
        match self.closed() {
            ClosedModel::Mn(m) => Ok(cmn_pmf(&m, &x)),
            ClosedModel::NMn(m) => cnmn_pmf(&m, &x, eps).map_err(to_py),
        }
    }

    fn pgf(&self, z: Vec<f64>) -> PyResult<f64> {
        compound_pgf(&self.inner, &z).map_err(to_py)
    }

    /// Joint p.m.f. on the box `[0, bounds]` keyed by tuples.
    #[pyo3(signature = (bounds, eps = 1e-12, engine = "closed"))]
    fn pmf_table<'py>(&self, py: Python<'py>, bounds: Vec<u64>, eps: f64, engine: &str) -> PyResult<Bound<'py, PyDict>> {
        let table = match engine {
            "closed" => self.closed().pmf_table(&bounds, eps),
            "generic" => compound_pmf_table(&self.inner, &bounds, eps),
            other => return Err(PyValueError::new_err(format!("unknown engine `{other}`"))),
        }
        .map_err(to_py)?;
        let d = PyDict::new(py);
        for (x, p) in table.entries {
            d.set_item(PyTuple::new(py, x)?, p)?;
        }
        Ok(d)
    }

    #[pyo3(signature = (i, m, eps = 1e-12))]
    fn marginal_pmf(&self, i: usize, m: u64, eps: f64) -> PyResult<f64> {
        self.closed().marginal_pmf(i, m, eps).map_err(to_py)
    }

    fn moments<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyDict>> {
        report_dict(py, &self.closed().moments())
    }

    /// Law of `X_i` given `X_j = x_j`.
    #[pyo3(signature = (i, j, x_j, eps = 1e-12))]
    fn conditional(&self, i: usize, j: usize, x_j: u64, eps: f64) -> PyResult<BTreeMap<u64, f64>> {
        conditional_pmf(&self.inner, i, j, x_j, eps).map_err(to_py)
    }

    /// `E(X_i | X_j = x_j)`.
    #[pyo3(signature = (i, j, x_j, eps = 1e-12))]
    fn regression(&self, i: usize, j: usize, x_j: u64, eps: f64) -> PyResult<f64> {
        self.closed().regression(i, j, x_j, eps).map_err(to_py)
    }

    /// `(draws, counts)` for `n` independent replicates.
    #[pyo3(signature = (n, seed = 0))]
    fn sample(&self, py: Python<'_>, n: usize, seed: u64) -> PyResult<(Vec<Vec<u64>>, Vec<u64>)> {
        let batch = py.detach(|| sample_compound(&self.inner, n, seed)).map_err(to_py)?;
        Ok((batch.draws, batch.counts))
    }

    /// Sample moments of `n` replicates in the same layout as `moments()`.
    #[pyo3(signature = (n, seed = 0))]
    fn sample_moments<'py>(&self, py: Python<'py>, n: usize, seed: u64) -> PyResult<Bound<'py, PyDict>> {
        let emp = py
            .detach(|| sample_compound(&self.inner, n, seed).and_then(|b| empirical_moments(&b)))
            .map_err(to_py)?;
        report_dict(py, &emp.estimate)
    }
}

/// Run the self-checks; returns `(name, passed, detail)` per check.
#[pyfunction]
#[pyo3(signature = (level = "quick"))]
fn run_checks(py: Python<'_>, level: &str) -> PyResult<Vec<(String, bool, String)>> {
    let level = match level {
        "quick" => Level::Quick,
        "full" => Level::Full,
        other => return Err(PyValueError::new_err(format!("unknown level `{other}`"))),
    };
    let outcomes = py.detach(|| verify::run(level));
    Ok(outcomes.into_iter().map(|o| (o.name.to_string(), o.passed, o.detail)).collect())
}

#[pymodule]
#[pyo3(name = "compound_sums")]
fn compound_sums_module(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyModel>()?;
    m.add_function(wrap_pyfunction!(run_checks, m)?)?;
    Ok(())
}
