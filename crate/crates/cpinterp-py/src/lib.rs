//! Python bindings: matrices cross the boundary as nested lists of
//! complex numbers (row major), results come back as dictionaries.

use num_complex::Complex64;
use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use pyo3::types::PyDict;

use cpinterp::choi_kraus as ck;
use cpinterp::hermlinalg::{self, CMatrix, HermitianMatrix};
use cpinterp::interpolation::{
    canonicalize, density_matrix, feasibility, prechecks, trace_preserving_constraints,
    FeasibilityStatus, Problem, SolveOptions, SolveOutcome,
};
use cpinterp::single_pair;
use cpinterp::subspace;
use cpinterp::Error;

type PyMatrix = Vec<Vec<Complex64>>;

fn err(e: Error) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn to_cmatrix(data: &[Vec<Complex64>], rows: usize, cols: usize, what: &str) -> PyResult<CMatrix> {
    if data.len() != rows {
        return Err(PyValueError::new_err(format!(
            "{what} must have {rows} rows, got {}",
            data.len()
        )));
    }
    for (i, row) in data.iter().enumerate() {
        if row.len() != cols {
            return Err(PyValueError::new_err(format!(
                "{what} row {i} must have {cols} entries, got {}",
                row.len()
            )));
        }
    }
    Ok(CMatrix::from_shape_fn((rows, cols), |(i, j)| data[i][j]))
}

fn to_hermitian(data: &[Vec<Complex64>], dim: usize, what: &str) -> PyResult<HermitianMatrix> {
    let m = to_cmatrix(data, dim, dim, what)?;
    HermitianMatrix::new(m).map_err(|e| PyValueError::new_err(format!("{what}: {e}")))
}

fn from_cmatrix(m: &CMatrix) -> PyMatrix {
    let (rows, cols) = m.dim();
    (0..rows)
        .map(|i| (0..cols).map(|j| m[[i, j]]).collect())
        .collect()
}

fn build_options(tol: Option<f64>, max_iter: Option<usize>, seed: Option<u64>) -> SolveOptions {
    let mut opts = SolveOptions::default();
    if let Some(t) = tol {
        opts.tol = t;
    }
    if let Some(m) = max_iter {
        opts.max_iter = m;
    }
    if let Some(s) = seed {
        opts.seed = s;
    }
    opts
}

fn build_problem(
    n: usize,
    k: usize,
    a: &[PyMatrix],
    b: &[PyMatrix],
    trace_preserving: bool,
    unital: bool,
) -> PyResult<Problem> {
    let a = a
        .iter()
        .enumerate()
        .map(|(i, m)| to_cmatrix(m, n, n, &format!("A[{i}]")))
        .collect::<PyResult<Vec<_>>>()?;
    let b = b
        .iter()
        .enumerate()
        .map(|(i, m)| to_cmatrix(m, k, k, &format!("B[{i}]")))
        .collect::<PyResult<Vec<_>>>()?;
    Problem::new(n, k, a, b, trace_preserving, unital).map_err(err)
}

/// Decide whether a completely positive map taking every `A[nu]` to
/// `B[nu]` exists. Returns a dict with a `status` key: `feasible`,
/// `gap-stalled`, `iteration-limit`, `precheck-failed`, or
/// `inconsistent-data`.
#[pyfunction]
#[pyo3(signature = (n, k, a, b, trace_preserving=false, unital=false, tol=None, max_iter=None, seed=None))]
#[allow(clippy::too_many_arguments)]
fn check(
    py: Python<'_>,
    n: usize,
    k: usize,
    a: Vec<PyMatrix>,
    b: Vec<PyMatrix>,
    trace_preserving: bool,
    unital: bool,
    tol: Option<f64>,
    max_iter: Option<usize>,
    seed: Option<u64>,
) -> PyResult<Py<PyDict>> {
    let opts = build_options(tol, max_iter, seed);
    let problem = build_problem(n, k, &a, &b, trace_preserving, unital)?;
    let out = PyDict::new_bound(py);
    let canonical = match canonicalize(&problem, opts.tol) {
        Ok(c) => c,
        Err(Error::InconsistentData { detail }) => {
            out.set_item("status", "inconsistent-data")?;
            out.set_item("detail", detail)?;
            return Ok(out.into());
        }
        Err(e) => return Err(err(e)),
    };
    let density = density_matrix(&canonical);
    let violations = prechecks(&canonical, &density);
    if !violations.is_empty() {
        out.set_item("status", "precheck-failed")?;
        out.set_item(
            "prechecks",
            violations.iter().map(|v| v.to_string()).collect::<Vec<_>>(),
        )?;
        return Ok(out.into());
    }
    let constraints = canonical
        .trace_preserving
        .then(|| trace_preserving_constraints(&canonical, &density));
    let result = feasibility(&density, constraints.as_deref(), &opts).map_err(err)?;
    let status = match result.status {
        FeasibilityStatus::Feasible => "feasible",
        FeasibilityStatus::GapStalled => "gap-stalled",
        FeasibilityStatus::IterationLimit => "iteration-limit",
    };
    out.set_item("status", status)?;
    out.set_item("lambda_min", result.lambda_min)?;
    out.set_item("gap", result.gap)?;
    out.set_item("iterations", result.iterations)?;
    Ok(out.into())
}

/// Decide feasibility and construct a solution. On success the dict holds
/// `status = "solved"`, the Choi matrix, the Kraus elements (each
/// `n x k`), the interpolation residuals, and the trace residual when the
/// trace-preserving flag was set; otherwise the dict matches `check`.
#[pyfunction]
#[pyo3(signature = (n, k, a, b, trace_preserving=false, unital=false, tol=None, max_iter=None, seed=None))]
#[allow(clippy::too_many_arguments)]
fn solve(
    py: Python<'_>,
    n: usize,
    k: usize,
    a: Vec<PyMatrix>,
    b: Vec<PyMatrix>,
    trace_preserving: bool,
    unital: bool,
    tol: Option<f64>,
    max_iter: Option<usize>,
    seed: Option<u64>,
) -> PyResult<Py<PyDict>> {
    let opts = build_options(tol, max_iter, seed);
    let problem = build_problem(n, k, &a, &b, trace_preserving, unital)?;
    let out = PyDict::new_bound(py);
    match cpinterp::interpolation::solve(&problem, &opts).map_err(err)? {
        SolveOutcome::Solved(solution) => {
            out.set_item("status", "solved")?;
            out.set_item("choi", from_cmatrix(solution.choi.as_matrix()))?;
            out.set_item(
                "kraus",
                solution.kraus.ops().iter().map(from_cmatrix).collect::<Vec<_>>(),
            )?;
            out.set_item("residuals", solution.residuals.clone())?;
            out.set_item("trace_residual", solution.trace_residual)?;
        }
        SolveOutcome::Diagnosed(diagnosis) => {
            use cpinterp::interpolation::Diagnosis;
            match diagnosis {
                Diagnosis::InconsistentDependence { detail } => {
                    out.set_item("status", "inconsistent-data")?;
                    out.set_item("detail", detail)?;
                }
                Diagnosis::PrecheckViolations(violations) => {
                    out.set_item("status", "precheck-failed")?;
                    out.set_item(
                        "prechecks",
                        violations.iter().map(|v| v.to_string()).collect::<Vec<_>>(),
                    )?;
                }
                Diagnosis::NotFound(result) => {
                    let status = match result.status {
                        FeasibilityStatus::GapStalled => "gap-stalled",
                        _ => "iteration-limit",
                    };
                    out.set_item("status", status)?;
                    out.set_item("gap", result.gap)?;
                    out.set_item("iterations", result.iterations)?;
                }
            }
        }
    }
    Ok(out.into())
}

/// Minimal Kraus rank for a single pair plus a construction using exactly
/// that many elements. Raises `ValueError` when no completely positive
/// map takes `a` to `b`.
#[pyfunction]
#[pyo3(signature = (a, b, tol=None))]
fn single_pair_solve(
    py: Python<'_>,
    a: PyMatrix,
    b: PyMatrix,
    tol: Option<f64>,
) -> PyResult<Py<PyDict>> {
    let n = a.len();
    let k = b.len();
    let a = to_hermitian(&a, n, "a")?;
    let b = to_hermitian(&b, k, "b")?;
    let tol = tol.unwrap_or(1e-9);
    let rank = single_pair::minimal_rank(&a, &b, tol).map_err(err)?;
    let set = single_pair::solve_single(&a, &b, tol).map_err(err)?;
    let out = PyDict::new_bound(py);
    out.set_item("minimal_rank", rank)?;
    out.set_item(
        "kraus",
        set.ops().iter().map(from_cmatrix).collect::<Vec<_>>(),
    )?;
    Ok(out.into())
}

/// Inertia `(kappa_minus, kappa_zero, kappa_plus)` of a Hermitian matrix.
#[pyfunction]
#[pyo3(signature = (matrix, tol=None))]
fn matrix_inertia(matrix: PyMatrix, tol: Option<f64>) -> PyResult<(usize, usize, usize)> {
    let n = matrix.len();
    let h = to_hermitian(&matrix, n, "matrix")?;
    let inert = hermlinalg::inertia(&h, tol.unwrap_or(1e-9)).map_err(err)?;
    Ok((inert.kappa_minus, inert.kappa_zero, inert.kappa_plus))
}

/// Convert a density matrix (size `n*k`) to the Choi matrix of the same
/// map.
#[pyfunction]
fn density_to_choi(matrix: PyMatrix, n: usize, k: usize) -> PyResult<PyMatrix> {
    let h = to_hermitian(&matrix, n * k, "matrix")?;
    let choi = ck::density_to_choi(&h, n, k).map_err(err)?;
    Ok(from_cmatrix(choi.as_matrix()))
}

/// Convert a Choi matrix (size `k*n`) to the density matrix of the same
/// map.
#[pyfunction]
fn choi_to_density(matrix: PyMatrix, n: usize, k: usize) -> PyResult<PyMatrix> {
    let m = to_cmatrix(&matrix, n * k, n * k, "matrix")?;
    let choi = ck::ChoiMatrix::new(n, k, m).map_err(err)?;
    let density = ck::choi_to_density(&choi).map_err(err)?;
    Ok(from_cmatrix(density.as_matrix()))
}

/// Kraus elements of a PSD Choi matrix; the count equals the Choi rank at
/// the given tolerance.
#[pyfunction]
#[pyo3(signature = (matrix, n, k, tol=None))]
fn kraus_from_choi(
    matrix: PyMatrix,
    n: usize,
    k: usize,
    tol: Option<f64>,
) -> PyResult<Vec<PyMatrix>> {
    let m = to_cmatrix(&matrix, n * k, n * k, "matrix")?;
    let choi = ck::ChoiMatrix::new(n, k, m).map_err(err)?;
    let set = ck::kraus_from_choi(&choi, tol.unwrap_or(1e-9)).map_err(err)?;
    Ok(set.ops().iter().map(from_cmatrix).collect())
}

/// Apply the map `X -> sum_j V_j^* X V_j` given its Kraus elements
/// (each `n x k`).
#[pyfunction]
fn apply_kraus(kraus: Vec<PyMatrix>, a: PyMatrix) -> PyResult<PyMatrix> {
    if kraus.is_empty() {
        return Err(PyValueError::new_err("kraus must not be empty"));
    }
    let n = kraus[0].len();
    let k = kraus[0].first().map_or(0, |row| row.len());
    let ops = kraus
        .iter()
        .enumerate()
        .map(|(j, m)| to_cmatrix(m, n, k, &format!("kraus[{j}]")))
        .collect::<PyResult<Vec<_>>>()?;
    let set = ck::KrausSet::new(n, k, ops).map_err(err)?;
    let a = to_cmatrix(&a, n, n, "a")?;
    Ok(from_cmatrix(&ck::apply_kraus(&set, &a).map_err(err)?))
}

/// Positive-definite element of the real span of the given Hermitian
/// matrices, or `None` when the span has no positive-definite element.
#[pyfunction]
#[pyo3(signature = (matrices, tol=None))]
fn positive_definite_element(
    matrices: Vec<PyMatrix>,
    tol: Option<f64>,
) -> PyResult<Option<PyMatrix>> {
    if matrices.is_empty() {
        return Err(PyValueError::new_err("matrices must not be empty"));
    }
    let n = matrices[0].len();
    let herm = matrices
        .iter()
        .enumerate()
        .map(|(i, m)| to_hermitian(m, n, &format!("matrices[{i}]")))
        .collect::<PyResult<Vec<_>>>()?;
    let (span, _) = subspace::build_span(&herm, 1e-9);
    let opts = build_options(tol, None, None);
    let witness = subspace::positive_definite_element(&span, &opts).map_err(err)?;
    Ok(witness.map(|h| from_cmatrix(h.as_matrix())))
}

#[pymodule]
fn _cpinterp(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_function(wrap_pyfunction!(check, m)?)?;
    m.add_function(wrap_pyfunction!(solve, m)?)?;
    m.add_function(wrap_pyfunction!(single_pair_solve, m)?)?;
    m.add_function(wrap_pyfunction!(matrix_inertia, m)?)?;
    m.add_function(wrap_pyfunction!(density_to_choi, m)?)?;
    m.add_function(wrap_pyfunction!(choi_to_density, m)?)?;
    m.add_function(wrap_pyfunction!(kraus_from_choi, m)?)?;
    m.add_function(wrap_pyfunction!(apply_kraus, m)?)?;
    m.add_function(wrap_pyfunction!(positive_definite_element, m)?)?;
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    Ok(())
}
