//! Interior-point backend: translation of [`ConicProgram`] into the
//! `Ax + s = b, s ∈ K` form of the Clarabel solver.

use clarabel::algebra::CscMatrix;
use clarabel::solver::{
    DefaultSettingsBuilder, DefaultSolver, IPSolver, SolverStatus, SupportedConeT,
};

use super::program::{ConeWeight, ConicProgram};
use super::{ConicSolution, ConicStatus};
use crate::constraints::Relation;

struct Triplets {
    rows: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<f64>,
    b: Vec<f64>,
}

impl Triplets {
    fn push_row(&mut self, entries: impl IntoIterator<Item = (usize, f64)>, rhs: f64) {
        let r = self.b.len();
        for (c, v) in entries {
            self.rows.push(r);
            self.cols.push(c);
            self.vals.push(v);
        }
        self.b.push(rhs);
    }
}

pub(super) fn solve_clarabel(cp: &ConicProgram, tol: f64) -> ConicSolution {
    let n = cp.n_vars();
    let mut t = Triplets {
        rows: Vec::new(),
        cols: Vec::new(),
        vals: Vec::new(),
        b: Vec::new(),
    };
    let mut cones = Vec::new();

    // equalities: a·x + s = rhs, s = 0
    let mut n_eq = 0;
    for row in cp.rows.iter().filter(|r| r.relation == Relation::Eq) {
        t.push_row(row.coeffs.iter().copied(), row.rhs);
        n_eq += 1;
    }
    if n_eq > 0 {
        cones.push(SupportedConeT::ZeroConeT(n_eq));
    }

    // inequalities and bounds as s = b - a·x ≥ 0
    let mut n_nonneg = 0;
    for row in &cp.rows {
        match row.relation {
            Relation::Le => t.push_row(row.coeffs.iter().copied(), row.rhs),
            Relation::Ge => t.push_row(row.coeffs.iter().map(|&(c, a)| (c, -a)), -row.rhs),
            Relation::Eq => continue,
        }
        n_nonneg += 1;
    }
    for i in 0..n {
        if cp.lower[i].is_finite() {
            t.push_row([(i, -1.0)], -cp.lower[i]);
            n_nonneg += 1;
        }
        if cp.upper[i].is_finite() {
            t.push_row([(i, 1.0)], cp.upper[i]);
            n_nonneg += 1;
        }
    }
    if n_nonneg > 0 {
        cones.push(SupportedConeT::NonnegativeConeT(n_nonneg));
    }

    // h² ≤ t·w  ⇔  ‖(t − w, 2h)‖ ≤ t + w
    for c in &cp.cones {
        match c.weight {
            ConeWeight::Var(w) => {
                t.push_row([(c.epigraph, -1.0), (w, -1.0)], 0.0);
                t.push_row([(c.epigraph, -1.0), (w, 1.0)], 0.0);
            }
            ConeWeight::Fixed(w) => {
                t.push_row([(c.epigraph, -1.0)], w);
                t.push_row([(c.epigraph, -1.0)], -w);
            }
        }
        t.push_row([(c.flow, -2.0)], 0.0);
        cones.push(SupportedConeT::SecondOrderConeT(3));
    }

    let m = t.b.len();
    let a = CscMatrix::new_from_triplets(m, n, t.rows, t.cols, t.vals);
    let p = CscMatrix::new_from_triplets(n, n, vec![], vec![], vec![]);

    let settings = DefaultSettingsBuilder::default()
        .verbose(false)
        .tol_gap_abs(tol)
        .tol_gap_rel(tol)
        .tol_feas(tol)
        .max_iter(500)
        .build()
        .expect("valid solver settings");

    let mut solver = match DefaultSolver::new(&p, &cp.objective, &a, &t.b, &cones, settings) {
        Ok(s) => s,
        Err(e) => return ConicSolution::failure(cp.n_vars(), format!("{e:?}")),
    };
    solver.solve();

    let sol = &solver.solution;
    let status = match sol.status {
        SolverStatus::Solved => ConicStatus::Optimal,
        SolverStatus::PrimalInfeasible | SolverStatus::AlmostPrimalInfeasible => {
            ConicStatus::Infeasible
        }
        SolverStatus::DualInfeasible | SolverStatus::AlmostDualInfeasible => ConicStatus::Unbounded,
        _ => ConicStatus::NumericalFailure,
    };
    let x = sol.x.clone();
    let objective: f64 = cp.objective.iter().zip(&x).map(|(c, v)| c * v).sum();
    let dual_objective = sol.obj_val_dual;
    let gap = (objective - dual_objective).abs() / objective.abs().max(1.0);
    ConicSolution {
        status,
        weights: x[..cp.n_weights].to_vec(),
        primal_residual: cp.max_violation(&x),
        x,
        objective,
        dual_objective,
        gap,
        iterations: sol.iterations,
        message: format!("{:?}", sol.status),
    }
}
