//! Python bindings. Matrices cross the boundary as nested lists of `complex`.

use pyo3::exceptions::{PyIOError, PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use vnlearn::linalg::{self, ComplexMatrix, SubsystemShape, C64};
use vnlearn::process::{self, ProcessMatrix};
use vnlearn::sdpmodel::{self, Backend, SolveOptions, SolveResult};
use vnlearn::strategies::{self, BuildOptions, ChoiBlocks, StrategyKind};
use vnlearn::verify::{self, TableOptions};
use vnlearn::Error;

fn to_py_err(e: Error) -> PyErr {
    match e {
        Error::Io(_) | Error::Parse { .. } => PyIOError::new_err(e.to_string()),
        Error::Solver(_) | Error::NotOptimal(_) => PyRuntimeError::new_err(e.to_string()),
        _ => PyValueError::new_err(e.to_string()),
    }
}

type Rows = Vec<Vec<C64>>;

fn to_rows(m: &ComplexMatrix) -> Rows {
    (0..m.dim()).map(|r| (0..m.dim()).map(|c| m.get(r, c)).collect()).collect()
}

fn from_rows(rows: Rows, dims: Option<Vec<usize>>) -> PyResult<ComplexMatrix> {
    let shape = match dims {
        Some(d) => SubsystemShape::new(d),
        None => SubsystemShape::single(rows.len()),
    }
    .map_err(to_py_err)?;
    ComplexMatrix::from_rows(&rows, shape).map_err(to_py_err)
}

fn parse_scheme(s: &str) -> PyResult<StrategyKind> {
    s.parse().map_err(PyValueError::new_err)
}

fn parse_backend(s: &str) -> PyResult<Backend> {
    s.parse().map_err(|e: String| PyValueError::new_err(e))
}

/// Haar-random `d × d` unitary from a seeded stream.
#[pyfunction]
fn haar_unitary(d: usize, seed: u64) -> PyResult<Rows> {
    if d < 1 {
        return Err(PyValueError::new_err("d must be at least 1"));
    }
    Ok(to_rows(&linalg::haar_unitary(d, seed)))
}

/// Prescript expansion of the process-matrix projector as
/// `[(coefficient, wire positions), ...]`.
#[pyfunction]
fn lv_expand(n: usize) -> PyResult<Vec<(i64, Vec<usize>)>> {
    if n < 1 {
        return Err(PyValueError::new_err("N must be at least 1"));
    }
    Ok(process::lv_expand(n)
        .into_iter()
        .map(|t| (t.coefficient, t.subset))
        .collect())
}

/// Residuals and verdict for an operator on `A_I^1 ⊗ A_O^1 ⊗ …` with the
/// given wire dimensions. Without `tol`, equalities are held to 1e-7 and the
/// eigenvalue slack to 1e-9.
#[pyfunction]
#[pyo3(signature = (matrix, dims, tol = None))]
fn is_process_matrix<'py>(py: Python<'py>, matrix: Rows, dims: Vec<usize>, tol: Option<f64>) -> PyResult<Bound<'py, PyDict>> {
    let w = from_rows(matrix, Some(dims))?;
    let (eq_tol, eig_tol) = match tol {
        Some(t) => (t, t),
        None => (process::DEFAULT_EQUALITY_TOL, process::DEFAULT_EIGENVALUE_TOL),
    };
    let rep = process::is_process_matrix_with(&w, eq_tol, eig_tol).map_err(to_py_err)?;
    let out = PyDict::new(py);
    out.set_item("valid", rep.valid)?;
    out.set_item("projector_residual", rep.projector_residual)?;
    out.set_item("trace_residual", rep.trace_residual)?;
    out.set_item("psd_residual", rep.psd_residual())?;
    out.set_item("min_eigenvalue", rep.min_eigenvalue)?;
    Ok(out)
}

/// Outcome of one strategy optimization.
#[pyclass(module = "pyvnlearn", frozen)]
struct Solution {
    #[pyo3(get)]
    scheme: String,
    #[pyo3(get)]
    d: usize,
    #[pyo3(get, name = "N")]
    n: usize,
    #[pyo3(get)]
    status: String,
    #[pyo3(get)]
    objective: f64,
    #[pyo3(get)]
    dual_objective: Option<f64>,
    #[pyo3(get)]
    backend: String,
    #[pyo3(get)]
    iterations: u32,
    blocks: Option<ChoiBlocks>,
    storage: Option<ProcessMatrix>,
}

impl Solution {
    fn from_result(kind: StrategyKind, d: usize, n: usize, sm: &strategies::StrategyModel, r: &SolveResult) -> PyResult<Self> {
        let (blocks, storage) = if r.is_optimal() {
            (
                Some(sm.choi_blocks(r).map_err(to_py_err)?),
                Some(strategies::extract_storage(r, d, n).map_err(to_py_err)?),
            )
        } else {
            (None, None)
        };
        Ok(Self {
            scheme: kind.to_string(),
            d,
            n,
            status: r.status.to_string(),
            objective: r.objective,
            dual_objective: r.dual_objective,
            backend: format!("{:?}", r.backend).to_lowercase(),
            iterations: r.iterations,
            blocks,
            storage,
        })
    }

    fn blocks(&self) -> PyResult<&ChoiBlocks> {
        self.blocks
            .as_ref()
            .ok_or_else(|| PyRuntimeError::new_err(format!("no blocks for a {} solution", self.status)))
    }
}

#[pymethods]
impl Solution {
    #[getter]
    fn optimal(&self) -> bool {
        self.blocks.is_some()
    }

    /// Block `L_{i,j}` for outcome `i` and label string `j`.
    fn block(&self, i: usize, j: Vec<usize>) -> PyResult<Rows> {
        let b = self.blocks()?;
        if i >= b.d() || j.len() != b.n() || j.iter().any(|&x| x >= b.d()) {
            return Err(PyValueError::new_err("block label out of range"));
        }
        Ok(to_rows(b.get(i, &j)))
    }

    /// Storage process matrix, or `None` when the solve was not optimal.
    fn storage(&self) -> Option<Rows> {
        self.storage.as_ref().map(|w| to_rows(w.matrix()))
    }

    #[pyo3(signature = (tol = 1e-5))]
    fn storage_valid(&self, tol: f64) -> PyResult<bool> {
        match &self.storage {
            Some(w) => Ok(w.validate(tol).map_err(to_py_err)?.valid),
            None => Ok(false),
        }
    }

    fn fidelity(&self, unitary: Rows) -> PyResult<f64> {
        let u = from_rows(unitary, None)?;
        verify::fidelity_for_unitary(self.blocks()?, &u).map_err(to_py_err)
    }

    /// `(mean, std)` of the fidelity over Haar samples.
    #[pyo3(signature = (samples = 1000, seed = 0))]
    fn monte_carlo(&self, py: Python<'_>, samples: usize, seed: u64) -> PyResult<(f64, f64)> {
        let blocks = self.blocks()?;
        let rep = py
            .detach(|| verify::mc_average_fidelity(blocks, samples, seed))
            .map_err(to_py_err)?;
        Ok((rep.mean, rep.std))
    }

    fn __repr__(&self) -> String {
        format!(
            "Solution(scheme='{}', d={}, N={}, status='{}', objective={:.6})",
            self.scheme, self.d, self.n, self.status, self.objective
        )
    }
}

/// Builds and solves one strategy model.
#[pyfunction]
#[pyo3(signature = (scheme, d, n, tol = 1e-5, solver = "auto", max_iter = 20_000))]
fn solve(py: Python<'_>, scheme: &str, d: usize, n: usize, tol: f64, solver: &str, max_iter: u32) -> PyResult<Solution> {
    let kind = parse_scheme(scheme)?;
    let backend = parse_backend(solver)?;
    let sm = strategies::build(kind, d, n, &BuildOptions::default()).map_err(to_py_err)?;
    let opts = SolveOptions {
        tol,
        max_iter,
        backend,
        verbose: false,
    };
    let result = py.detach(|| sdpmodel::solve(&sm.model, &opts));
    Solution::from_result(kind, d, n, &sm, &result)
}

/// All strategies for `N = 1..n_max`, as one dict per cell.
#[pyfunction]
#[pyo3(signature = (d = 2, n_max = 3, tol = 1e-5, jobs = 0))]
fn reproduce_table<'py>(py: Python<'py>, d: usize, n_max: usize, tol: f64, jobs: usize) -> PyResult<Vec<Bound<'py, PyDict>>> {
    let opts = TableOptions {
        solve: SolveOptions {
            tol,
            ..SolveOptions::default()
        },
        jobs,
        ..TableOptions::default()
    };
    let table = py
        .detach(|| verify::reproduce_table(d, n_max, &opts))
        .map_err(to_py_err)?;
    table
        .cells
        .iter()
        .map(|c| {
            let row = PyDict::new(py);
            row.set_item("strategy", c.strategy.as_str())?;
            row.set_item("d", c.d)?;
            row.set_item("N", c.n)?;
            row.set_item("value", c.value)?;
            row.set_item("reference", c.reference)?;
            row.set_item("delta", c.delta)?;
            row.set_item("pass", c.pass)?;
            row.set_item("status", c.status.to_string())?;
            Ok(row)
        })
        .collect()
}

#[pymodule]
fn pyvnlearn(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Solution>()?;
    m.add_function(wrap_pyfunction!(haar_unitary, m)?)?;
    m.add_function(wrap_pyfunction!(lv_expand, m)?)?;
    m.add_function(wrap_pyfunction!(is_process_matrix, m)?)?;
    m.add_function(wrap_pyfunction!(solve, m)?)?;
    m.add_function(wrap_pyfunction!(reproduce_table, m)?)?;
    Ok(())
}
