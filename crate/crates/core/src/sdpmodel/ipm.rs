//! Adapter to the Clarabel interior-point solver.
//!
//! The boundary is the [`StandardForm`] triplet description in, primal vector
//! and status out; nothing else about the model leaks into the solver.

use clarabel::algebra::CscMatrix;
use clarabel::solver::{
    DefaultSettingsBuilder, DefaultSolver, IPSolver, SolverStatus, SupportedConeT,
};

use super::real::{Cone, StandardForm};
use super::result::{BackendOutput, SolveStatus};

pub(crate) fn solve(form: &StandardForm, tol: f64, max_iter: u32, verbose: bool) -> BackendOutput {
    let p = CscMatrix::<f64>::zeros((form.n, form.n));
    let a = CscMatrix::new_from_triplets(
        form.m,
        form.n,
        form.a_rows.clone(),
        form.a_cols.clone(),
        form.a_vals.clone(),
    );
    let cones: Vec<SupportedConeT<f64>> = form
        .cones
        .iter()
        .map(|c| match *c {
            Cone::Zero { dim } => SupportedConeT::ZeroConeT(dim),
            Cone::PsdTriangle { side } => SupportedConeT::PSDTriangleConeT(side),
        })
        .collect();
    let settings = match DefaultSettingsBuilder::default()
        .max_iter(max_iter)
        .verbose(verbose)
        .tol_gap_abs(tol)
        .tol_gap_rel(tol)
        .tol_feas((tol * 1e-2).max(1e-10))
        .build()
    {
        Ok(s) => s,
        Err(e) => return BackendOutput::failure(format!("invalid solver settings: {e}")),
    };
    let mut solver = match DefaultSolver::new(&p, &form.q, &a, &form.b, &cones, settings) {
        Ok(s) => s,
        Err(e) => return BackendOutput::failure(format!("solver setup failed: {e}")),
    };
    solver.solve();
    let sol = &solver.solution;
    let (status, message) = match sol.status {
        SolverStatus::Solved => (SolveStatus::Optimal, None),
        SolverStatus::AlmostSolved => (
            SolveStatus::Inaccurate,
            Some("interior-point method reached reduced accuracy only".to_string()),
        ),
        SolverStatus::PrimalInfeasible | SolverStatus::AlmostPrimalInfeasible => {
            (SolveStatus::Infeasible, Some("primal infeasibility certificate".to_string()))
        }
        SolverStatus::DualInfeasible | SolverStatus::AlmostDualInfeasible => {
            (SolveStatus::Error, Some("objective is unbounded".to_string()))
        }
        SolverStatus::MaxIterations | SolverStatus::MaxTime | SolverStatus::InsufficientProgress => (
            SolveStatus::Inaccurate,
            Some(format!("interior-point method stopped: {:?}", sol.status)),
        ),
        other => (SolveStatus::Error, Some(format!("interior-point method failed: {other:?}"))),
    };
    BackendOutput {
        x: sol.x.clone(),
        status,
        // the form minimizes −objective
        objective: -sol.obj_val,
        dual_objective: Some(-sol.obj_val_dual),
        iterations: sol.iterations,
        message,
    }
}
