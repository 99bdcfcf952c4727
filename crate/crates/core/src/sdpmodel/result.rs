use serde::{Deserialize, Serialize};

use super::presolve::presolve;
use super::real::{to_real_conic, RealConicModel, SparseRow, StandardForm};
use super::{admm, ipm, ConicModel};
use crate::linalg::ComplexMatrix;

/// Cone work `Σ (triangle size)²` above which `Auto` switches to ADMM.
const IPM_WORK_LIMIT: f64 = 5e7;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Backend {
    /// Interior point unless the cone work is too large.
    Auto,
    /// Clarabel interior point.
    Ipm,
    /// First-order splitting method.
    Admm,
}

impl std::str::FromStr for Backend {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "auto" => Ok(Self::Auto),
            "ipm" => Ok(Self::Ipm),
            "admm" => Ok(Self::Admm),
            other => Err(format!("unknown solver `{other}` (expected auto, ipm or admm)")),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SolveOptions {
    pub tol: f64,
    pub max_iter: u32,
    pub backend: Backend,
    pub verbose: bool,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self {
            tol: 1e-5,
            max_iter: 20_000,
            backend: Backend::Auto,
            verbose: false,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SolveStatus {
    Optimal,
    Inaccurate,
    Infeasible,
    Error,
}

impl std::fmt::Display for SolveStatus {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            Self::Optimal => "optimal",
            Self::Inaccurate => "inaccurate",
            Self::Infeasible => "infeasible",
            Self::Error => "error",
        };
        f.write_str(s)
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct Residuals {
    /// Largest `|f(X) − rhs|` over the model equalities.
    pub primal_equality: f64,
    /// Smallest eigenvalue of every block.
    pub min_eigenvalues: Vec<f64>,
}

impl Residuals {
    pub fn min_eigenvalue(&self) -> f64 {
        self.min_eigenvalues
            .iter()
            .cloned()
            .fold(f64::INFINITY, f64::min)
    }
}

#[derive(Clone, Debug)]
pub struct SolveResult {
    pub status: SolveStatus,
    /// Objective evaluated on the recovered blocks.
    pub objective: f64,
    /// Objective as reported by the backend.
    pub backend_objective: f64,
    pub dual_objective: Option<f64>,
    pub blocks: Vec<ComplexMatrix>,
    pub residuals: Residuals,
    pub iterations: u32,
    pub backend: Backend,
    pub message: Option<String>,
    pub removed_rows: usize,
}

impl SolveResult {
    fn failed(status: SolveStatus, backend: Backend, message: String) -> Self {
        Self {
            status,
            objective: f64::NAN,
            backend_objective: f64::NAN,
            dual_objective: None,
            blocks: Vec::new(),
            residuals: Residuals::default(),
            iterations: 0,
            backend,
            message: Some(message),
            removed_rows: 0,
        }
    }

    pub fn is_optimal(&self) -> bool {
        self.status == SolveStatus::Optimal
    }

    /// `|primal − dual|` when the backend reports a dual value.
    pub fn duality_gap(&self) -> Option<f64> {
        self.dual_objective
            .map(|d| (self.backend_objective - d).abs())
    }
}

/// What a backend hands back.
pub(crate) struct BackendOutput {
    pub x: Vec<f64>,
    pub status: SolveStatus,
    pub objective: f64,
    pub dual_objective: Option<f64>,
    pub iterations: u32,
    pub message: Option<String>,
}

impl BackendOutput {
    pub fn failure(message: String) -> Self {
        Self {
            x: Vec::new(),
            status: SolveStatus::Error,
            objective: f64::NAN,
            dual_objective: None,
            iterations: 0,
            message: Some(message),
        }
    }
}

/// Presolved standard form of a model plus what is needed to map back.
pub struct Prepared {
    pub real: RealConicModel,
    pub rows: Vec<SparseRow>,
    pub rhs: Vec<f64>,
    pub removed_rows: usize,
}

impl Prepared {
    pub fn standard_form(&self) -> StandardForm {
        self.real.standard_form(&self.rows, &self.rhs)
    }
}

/// Real coordinates plus rank-revealing presolve. `Err` carries an
/// infeasibility or construction message.
pub fn prepare(model: &ConicModel) -> Result<Prepared, (SolveStatus, String)> {
    let real = to_real_conic(model).map_err(|e| (SolveStatus::Error, e.to_string()))?;
    let pre = presolve(&real.rows, &real.rhs, real.n_vars);
    if let Some(msg) = pre.inconsistent {
        return Err((SolveStatus::Infeasible, msg));
    }
    let rows: Vec<SparseRow> = pre.kept.iter().map(|&k| real.rows[k].clone()).collect();
    let rhs: Vec<f64> = pre.kept.iter().map(|&k| real.rhs[k]).collect();
    let removed_rows = real.rows.len() - rows.len();
    Ok(Prepared {
        real,
        rows,
        rhs,
        removed_rows,
    })
}

pub(crate) fn solve_model(model: &ConicModel, options: &SolveOptions) -> SolveResult {
    if options.tol <= 0.0 || !options.tol.is_finite() {
        return SolveResult::failed(
            SolveStatus::Error,
            options.backend,
            format!("tolerance must be positive, got {}", options.tol),
        );
    }
    let prepared = match prepare(model) {
        Ok(p) => p,
        Err((status, msg)) => return SolveResult::failed(status, options.backend, msg),
    };
    let backend = match options.backend {
        Backend::Auto if prepared.real.cone_work() > IPM_WORK_LIMIT => Backend::Admm,
        Backend::Auto => Backend::Ipm,
        other => other,
    };
    let out = match backend {
        Backend::Admm => admm::solve(&prepared, options.tol, options.max_iter, options.verbose),
        _ => ipm::solve(
            &prepared.standard_form(),
            options.tol,
            options.max_iter,
            options.verbose,
        ),
    };
    if out.x.len() != prepared.real.n_vars || out.status == SolveStatus::Infeasible {
        let mut r = SolveResult::failed(
            out.status,
            backend,
            out.message.unwrap_or_else(|| "backend returned no solution".into()),
        );
        r.iterations = out.iterations;
        return r;
    }
    let blocks = prepared.real.recover(&out.x);
    let objective = model.objective().evaluate(&blocks);
    let residuals = Residuals {
        primal_equality: model.equality_residual(&blocks),
        min_eigenvalues: blocks.iter().map(|b| b.min_eigenvalue()).collect(),
    };
    let rhs_scale = 1.0
        + model
            .equalities()
            .iter()
            .map(|e| e.rhs.abs())
            .fold(0.0, f64::max);
    let mut status = out.status;
    let mut message = out.message;
    if status == SolveStatus::Optimal {
        if residuals.primal_equality > options.tol * rhs_scale {
            status = SolveStatus::Inaccurate;
            message = Some(format!(
                "equality residual {:.3e} exceeds tolerance",
                residuals.primal_equality
            ));
        } else if residuals.min_eigenvalue() < -options.tol * rhs_scale {
            status = SolveStatus::Inaccurate;
            message = Some(format!(
                "minimum eigenvalue {:.3e} below tolerance",
                residuals.min_eigenvalue()
            ));
        }
    }
    SolveResult {
        status,
        objective,
        backend_objective: out.objective,
        dual_objective: out.dual_objective,
        blocks,
        residuals,
        iterations: out.iterations,
        backend,
        message,
        removed_rows: prepared.removed_rows,
    }
}
