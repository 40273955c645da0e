//! Python bindings. Rationals cross the boundary as strings ("a/b"); any
//! argument whose `str()` parses as a rational is accepted, so `int` and
//! `fractions.Fraction` work too.

use pyo3::exceptions::{PyIndexError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyModule;

use dc_core::operators;
use dc_core::partition::{self as part, bell_number};
use dc_core::rational::{format_rational, parse_rational};
use dc_core::{ising, linalg, solver, DcError, MeasureVector, Rational};

fn err(e: DcError) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn rational_arg(value: &Bound<'_, PyAny>) -> PyResult<Rational> {
    parse_rational(&value.str()?.to_cow()?).map_err(err)
}

fn strings(values: &[Rational]) -> Vec<String> {
    values.iter().map(format_rational).collect()
}

fn to_python<'py>(py: Python<'py>, value: &serde_json::Value) -> PyResult<Bound<'py, PyAny>> {
    PyModule::import(py, "json")?.call_method1("loads", (value.to_string(),))
}

/// Reads a measure from a dict of bit strings, or `{"n": .., "values": [..]}`.
fn measure_arg(nu: &Bound<'_, PyAny>, n: Option<usize>) -> PyResult<MeasureVector> {
    let py = nu.py();
    let json = PyModule::import(py, "json")?;
    let kwargs = pyo3::types::PyDict::new(py);
    kwargs.set_item("default", py.get_type::<pyo3::types::PyString>())?;
    let text: String = json.call_method("dumps", (nu,), Some(&kwargs))?.extract()?;
    let value: serde_json::Value =
        serde_json::from_str(&text).map_err(|e| PyValueError::new_err(e.to_string()))?;
    MeasureVector::from_json(&value, n).map_err(err)
}

#[pyclass(name = "Partition", frozen, eq, hash, skip_from_py_object)]
#[derive(Clone, PartialEq, Eq, Hash)]
struct PyPartition(part::SetPartition);

#[pymethods]
impl PyPartition {
    /// Builds a partition of `{1..n}` from its blocks.
    #[new]
    fn new(n: usize, blocks: Vec<Vec<usize>>) -> PyResult<Self> {
        part::SetPartition::from_blocks(n, &blocks).map(Self).map_err(err)
    }

    #[staticmethod]
    fn parse(text: &str) -> PyResult<Self> {
        part::SetPartition::parse(text).map(Self).map_err(err)
    }

    #[getter]
    fn n(&self) -> usize {
        self.0.n()
    }

    #[getter]
    fn num_blocks(&self) -> usize {
        self.0.num_blocks()
    }

    fn blocks(&self) -> Vec<Vec<usize>> {
        self.0.blocks()
    }

    fn block_sizes(&self) -> Vec<usize> {
        self.0.block_sizes()
    }

    /// Number of blocks meeting `{i : rho_i = 1}`, or `None` if `rho` splits a block.
    fn color_count(&self, rho: &str) -> PyResult<Option<usize>> {
        let rho = part::Outcome::parse(rho).map_err(err)?;
        if !part::is_compatible(&self.0, &rho).map_err(err)? {
            return Ok(None);
        }
        part::color_count(&self.0, &rho).map(Some).map_err(err)
    }

    fn __str__(&self) -> String {
        self.0.to_string()
    }

    fn __repr__(&self) -> String {
        format!("Partition({:?})", self.0.to_string())
    }
}

#[pyclass(name = "RationalMatrix", frozen)]
struct PyMatrix(dc_core::RationalMatrix);

#[pymethods]
impl PyMatrix {
    #[new]
    fn new(rows: Vec<Vec<Bound<'_, PyAny>>>) -> PyResult<Self> {
        let rows = rows
            .iter()
            .map(|r| r.iter().map(rational_arg).collect::<PyResult<Vec<_>>>())
            .collect::<PyResult<Vec<_>>>()?;
        dc_core::RationalMatrix::from_rows(rows).map(Self).map_err(err)
    }

    #[getter]
    fn shape(&self) -> (usize, usize) {
        (self.0.rows(), self.0.cols())
    }

    fn get(&self, row: usize, col: usize) -> PyResult<String> {
        if row >= self.0.rows() || col >= self.0.cols() {
            return Err(PyIndexError::new_err(format!("({row}, {col}) out of bounds")));
        }
        Ok(format_rational(self.0.get(row, col)))
    }

    fn to_list(&self) -> Vec<Vec<String>> {
        (0..self.0.rows()).map(|i| strings(self.0.row(i))).collect()
    }

    fn to_floats(&self) -> Vec<Vec<f64>> {
        self.0.to_f64_rows()
    }

    fn row_labels(&self) -> Vec<String> {
        self.0.row_labels().iter().map(ToString::to_string).collect()
    }

    fn col_labels(&self) -> Vec<String> {
        self.0.col_labels().iter().map(ToString::to_string).collect()
    }

    fn rank(&self) -> usize {
        linalg::rank(&self.0)
    }

    fn kernel(&self) -> Vec<Vec<String>> {
        linalg::kernel(&self.0).iter().map(|k| strings(k)).collect()
    }

    fn mul_vec(&self, x: Vec<Bound<'_, PyAny>>) -> PyResult<Vec<String>> {
        let x = x.iter().map(rational_arg).collect::<PyResult<Vec<_>>>()?;
        self.0.mul_vec(&x).map(|v| strings(&v)).map_err(err)
    }

    fn to_csv(&self) -> String {
        self.0.to_csv()
    }

    fn to_json<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyAny>> {
        to_python(py, &self.0.to_json())
    }

    fn __repr__(&self) -> String {
        format!("RationalMatrix({}x{})", self.0.rows(), self.0.cols())
    }
}

#[pyfunction]
fn bell(n: usize) -> u128 {
    bell_number(n)
}

#[pyfunction]
fn enumerate_partitions(n: usize) -> PyResult<Vec<PyPartition>> {
    part::enumerate_partitions(n)
        .map(|ps| ps.into_iter().map(PyPartition).collect())
        .map_err(err)
}

#[pyfunction]
fn color_operator(n: usize, p: &Bound<'_, PyAny>) -> PyResult<PyMatrix> {
    operators::build_color_operator(n, &rational_arg(p)?).map(PyMatrix).map_err(err)
}

#[pyfunction]
fn invariant_operator(n: usize, p: &Bound<'_, PyAny>) -> PyResult<PyMatrix> {
    operators::build_invariant_operator(n, &rational_arg(p)?).map(PyMatrix).map_err(err)
}

/// Rank of `A_{n,p}`.
#[pyfunction]
fn rank(n: usize, p: &Bound<'_, PyAny>) -> PyResult<usize> {
    Ok(linalg::rank(&operators::build_color_operator(n, &rational_arg(p)?).map_err(err)?))
}

/// Full report for `A_{n,p} q = nu`, as a dict.
#[pyfunction]
#[pyo3(signature = (nu, p, n=None))]
fn solve<'py>(nu: &Bound<'py, PyAny>, p: &Bound<'py, PyAny>, n: Option<usize>) -> PyResult<Bound<'py, PyAny>> {
    let nu = measure_arg(nu, n)?;
    let report = solver::solve_dc(&nu, &rational_arg(p)?).map_err(err)?;
    to_python(p.py(), &report.to_json())
}


#[pyfunction]
#[pyo3(signature = (nu, p, n=None))]
fn in_range(nu: &Bound<'_, PyAny>, p: &Bound<'_, PyAny>, n: Option<usize>) -> PyResult<bool> {
    solver::in_range(&measure_arg(nu, n)?, &rational_arg(p)?).map_err(err)
}

/// The explicit formal solution at `p = 1/2` for a flip-symmetric measure.
#[pyfunction]
#[pyo3(signature = (nu, n=None))]
fn half_solution(nu: &Bound<'_, PyAny>, n: Option<usize>) -> PyResult<Vec<String>> {
    solver::half_solution(&measure_arg(nu, n)?).map(|q| strings(&q)).map_err(err)
}

/// The DC measure of a partition law `q` (enumeration order) at `p`.
#[pyfunction]
fn dc_image<'py>(py: Python<'py>, q: Vec<Bound<'py, PyAny>>, n: usize, p: &Bound<'py, PyAny>) -> PyResult<Bound<'py, PyAny>> {
    let q = q.iter().map(rational_arg).collect::<PyResult<Vec<_>>>()?;
    let nu = solver::dc_image(&q, n, &rational_arg(p)?).map_err(err)?;
    to_python(py, &nu.to_json())
}

#[pyfunction]
fn mobius_phi(n: usize, f: Vec<Bound<'_, PyAny>>) -> PyResult<Vec<String>> {
    let f = f.iter().map(rational_arg).collect::<PyResult<Vec<_>>>()?;
    operators::mobius_phi(n, &f).map(|v| strings(&v)).map_err(err)
}

#[pyfunction]
fn mobius_phi_inv(n: usize, f: Vec<Bound<'_, PyAny>>) -> PyResult<Vec<String>> {
    let f = f.iter().map(rational_arg).collect::<PyResult<Vec<_>>>()?;
    operators::mobius_phi_inv(n, &f).map(|v| strings(&v)).map_err(err)
}

/// `(q1, q2, q3)` of the `h -> 0` limit for the Ising triangle.
#[pyfunction]
fn ising_limit(j: f64) -> PyResult<(f64, f64, f64)> {
    let s = ising::limit_representation(j).map_err(err)?;
    Ok((s.q1, s.q2, s.q3))
}

/// Random-cluster partition law of the Ising triangle, enumeration order.
#[pyfunction]
fn ising_rcm(j: f64) -> PyResult<Vec<f64>> {
    ising::rcm_representation(j).map_err(err)
}

/// `(p, q)` for the unique representation at field `h != 0`.
#[pyfunction]
fn ising_representation(j: f64, h: f64) -> PyResult<(f64, Vec<f64>)> {
    let r = ising::unique_representation(j, h).map_err(err)?;
    Ok((r.p, r.q))
}

#[pyfunction]
#[pyo3(signature = (j_grid, h_grid=ising::DEFAULT_FIELDS.to_vec()))]
fn ising_corollary<'py>(py: Python<'py>, j_grid: Vec<f64>, h_grid: Vec<f64>) -> PyResult<Bound<'py, PyAny>> {
    let rows = ising::corollary_report(&j_grid, &h_grid).map_err(err)?;
    let value = serde_json::Value::Array(rows.iter().map(|r| r.to_json()).collect());
    to_python(py, &value)
}

#[pymodule]
fn dcmodel(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyPartition>()?;
    m.add_class::<PyMatrix>()?;
    m.add_function(wrap_pyfunction!(bell, m)?)?;
    m.add_function(wrap_pyfunction!(enumerate_partitions, m)?)?;
    m.add_function(wrap_pyfunction!(color_operator, m)?)?;
    m.add_function(wrap_pyfunction!(invariant_operator, m)?)?;
    m.add_function(wrap_pyfunction!(rank, m)?)?;
    m.add_function(wrap_pyfunction!(solve, m)?)?;
    m.add_function(wrap_pyfunction!(in_range, m)?)?;
    m.add_function(wrap_pyfunction!(half_solution, m)?)?;
    m.add_function(wrap_pyfunction!(dc_image, m)?)?;
    m.add_function(wrap_pyfunction!(mobius_phi, m)?)?;
    m.add_function(wrap_pyfunction!(mobius_phi_inv, m)?)?;
    m.add_function(wrap_pyfunction!(ising_limit, m)?)?;
    m.add_function(wrap_pyfunction!(ising_rcm, m)?)?;
    m.add_function(wrap_pyfunction!(ising_representation, m)?)?;
    m.add_function(wrap_pyfunction!(ising_corollary, m)?)?;
    Ok(())
}
