//! Second-order cone formulation of linearly constrained A-optimality and
//! the approximate-design pipeline built on it.

mod backend;
mod program;

pub use program::{build_a_opt_socp, ConeWeight, ConicProgram, RotatedCone, SparseRow, VarKind};

use crate::constraints::Relation;
use crate::design::{CriterionValue, Design};
use crate::error::{Error, Result};
use crate::problem::CbrcProblem;
use crate::reduction::build_artificial;

pub const DEFAULT_TOL: f64 = 1e-8;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ConicStatus {
    Optimal,
    Infeasible,
    Unbounded,
    NumericalFailure,
}

impl ConicStatus {
    pub fn as_str(&self) -> &'static str {
        match self {
            ConicStatus::Optimal => "optimal",
            ConicStatus::Infeasible => "infeasible",
            ConicStatus::Unbounded => "unbounded",
            ConicStatus::NumericalFailure => "numerical-failure",
        }
    }
}

#[derive(Clone, Debug)]
pub struct ConicSolution {
    pub status: ConicStatus,
    /// All primal variables, indexed like [`ConicProgram::kinds`].
    pub x: Vec<f64>,
    /// Design-weight block of `x`.
    pub weights: Vec<f64>,
    pub objective: f64,
    pub dual_objective: f64,
    /// `|primal − dual| / max(1, |primal|)`.
    pub gap: f64,
    /// Largest absolute violation of rows, bounds or cones at `x`.
    pub primal_residual: f64,
    pub iterations: u32,
    /// Backend status text.
    pub message: String,
}

impl ConicSolution {
    fn failure(n: usize, message: String) -> Self {
        Self {
            status: ConicStatus::NumericalFailure,
            x: vec![f64::NAN; n],
            weights: Vec::new(),
            objective: f64::NAN,
            dual_objective: f64::NAN,
            gap: f64::INFINITY,
            primal_residual: f64::INFINITY,
            iterations: 0,
            message,
        }
    }

    fn infeasible(n: usize, message: String) -> Self {
        Self {
            status: ConicStatus::Infeasible,
            ..Self::failure(n, message)
        }
    }

    /// Valid lower bound on the program optimum (up to solver accuracy).
    pub fn lower_bound(&self) -> f64 {
        self.objective.min(self.dual_objective)
    }
}

/// Solves `cp` to relative gap and feasibility tolerance `tol`.
///
/// Feasibility is measured relative to the largest right-hand side or
/// solution entry. Deterministic for identical input.
pub fn solve(cp: &ConicProgram, tol: f64) -> ConicSolution {
    assert!(tol > 0.0, "tolerance must be positive");
    for (i, (&lo, &hi)) in cp.lower().iter().zip(cp.upper()).enumerate() {
        if lo > hi {
            return ConicSolution::infeasible(cp.n_vars(), format!("empty bounds on variable {i}"));
        }
    }
    for (i, row) in cp.rows().iter().enumerate() {
        if row.coeffs.is_empty() && !row.relation.holds(0.0, row.rhs, 0.0) {
            return ConicSolution::infeasible(cp.n_vars(), format!("row {i} reads 0 {} {}", row.relation, row.rhs));
        }
    }
    let mut sol = backend::solve_clarabel(cp, tol);
    if sol.status == ConicStatus::Optimal {
        let scale = cp
            .rows()
            .iter()
            .filter(|r| r.relation != Relation::Eq || r.rhs != 0.0)
            .map(|r| r.rhs.abs())
            .chain(sol.x.iter().map(|v| v.abs()))
            .fold(1.0, f64::max);
        if sol.gap > tol || sol.primal_residual > tol * scale {
            log::debug!(
                "backend reported optimal but gap {:e} / residual {:e} exceed tolerance",
                sol.gap,
                sol.primal_residual
            );
            sol.message = format!(
                "{} but gap {:.2e} / residual {:.2e} exceed tolerance {tol:.0e}",
                sol.message, sol.gap, sol.primal_residual
            );
            sol.status = ConicStatus::NumericalFailure;
        }
    }
    sol
}

/// Result of the approximate-design pipeline.
#[derive(Clone, Debug)]
pub struct ApproximateDesign {
    pub status: ConicStatus,
    /// Optimal weights on the original design space.
    pub design: Design,
    /// Conic objective, i.e. the artificial A-criterion at the optimum.
    pub objective: f64,
    pub gap: f64,
    /// Criterion re-evaluated at `design` by direct linear algebra.
    pub value: CriterionValue,
    pub solution: ConicSolution,
}

/// Optimal approximate design: reduction, cone program, solve, recovery.
pub fn solve_approximate(problem: &CbrcProblem, tol: f64) -> Result<ApproximateDesign> {
    let ap = build_artificial(problem)?;
    let cp = build_a_opt_socp(&ap);
    let solution = solve(&cp, tol);
    match solution.status {
        ConicStatus::Optimal => {}
        ConicStatus::Infeasible => {
            return Err(Error::Infeasible(format!(
                "no permissible design ({})",
                solution.message
            )))
        }
        _ => {
            return Err(Error::Solver(format!(
                "conic solve ended with status {} ({})",
                solution.status.as_str(),
                solution.message
            )))
        }
    }
    let clamped = clamp_to_bounds(&solution.weights, problem);
    let design = ap.recover_design(&ap.lift(&Design::from_solver(&clamped, 1e-6)?)?)?;
    let value = problem.cbrc_value(&design)?;
    Ok(ApproximateDesign {
        status: solution.status,
        design,
        objective: solution.objective,
        gap: solution.gap,
        value,
        solution,
    })
}

fn clamp_to_bounds(weights: &[f64], problem: &CbrcProblem) -> Vec<f64> {
    let c = problem.constraints();
    weights
        .iter()
        .zip(c.lower().iter().zip(c.upper()))
        .map(|(&w, (&lo, &hi))| w.max(lo).min(hi))
        .collect()
}
