//! Random coefficient regression front-end.
//!
//! Individuals `i = 1..n` are observed at the same `m` design points,
//! `Y_ij = f(x_j)ᵀ β_i + ε_ij` with `Cov(β_i) = σ² D`. The prediction
//! criteria are
//!
//! ```text
//! L(ξ)    = tr(M(ξ)⁻¹ A) + (n − 1) tr((M(ξ) + D⁻¹)⁻¹ A)
//! IMSE(ξ) = L(ξ) with A = V = Σ_x ν(x) f(x) f(x)ᵀ
//! ```
//!
//! The common factor σ² scales both terms and never changes the optimal
//! design, so it is left out everywhere.

use crate::constraints::{ConstraintRow, LinearConstraintSet, Relation};
use crate::design::{DesignSpace, RegressionMap};
use crate::error::{Error, Result};
use crate::linalg::{cholesky, spd_inverse, SymMatrix};
use crate::problem::{BayesTerm, CbrcProblem};

/// Intercept dispersion `δ₁` of the straight-line example.
pub const EXAMPLE_INTERCEPT_DISPERSION: f64 = 0.01;
pub const EXAMPLE_INDIVIDUALS: usize = 100;
pub const EXAMPLE_TRIALS: usize = 10;
pub const EXAMPLE_GRID_SIZE: usize = 51;

#[derive(Clone, Debug, PartialEq)]
pub enum RcrCriterion {
    /// Linear prediction criterion with a positive definite weight matrix `A`.
    Linear(SymMatrix),
    /// Integrated mean squared error with per-point measure `ν`.
    Imse(Vec<f64>),
}

#[derive(Clone, Debug, PartialEq)]
pub struct RcrSpec {
    pub space: DesignSpace,
    pub regression: RegressionMap,
    /// Number of individuals `n ≥ 2`.
    pub individuals: usize,
    /// Trials per individual `m ≥ 1`.
    pub trials: usize,
    /// Dispersion matrix `D` of the individual parameters (without σ²).
    pub dispersion: SymMatrix,
    pub criterion: RcrCriterion,
}

impl RcrSpec {
    fn validate(&self) -> Result<()> {
        if self.individuals < 2 {
            return Err(Error::Domain(format!(
                "need at least two individuals, got {}",
                self.individuals
            )));
        }
        if self.trials < 1 {
            return Err(Error::Domain("need at least one trial per individual".into()));
        }
        if self.regression.len() != self.space.len() {
            return Err(Error::Dimension("regression map does not match the design space".into()));
        }
        if self.dispersion.dim() != self.regression.dim() {
            return Err(Error::Dimension(format!(
                "dispersion matrix must be {0}x{0}",
                self.regression.dim()
            )));
        }
        Ok(())
    }

    /// The problem for whichever criterion the spec carries.
    pub fn to_problem(&self) -> Result<CbrcProblem> {
        match &self.criterion {
            RcrCriterion::Linear(_) => linear_pred_problem(self),
            RcrCriterion::Imse(_) => imse_problem(self),
        }
    }
}

/// Linear prediction criterion as a two-term problem:
/// `B₁ = 0, H₁ = A, B₂ = D⁻¹, H₂ = (n − 1) A`, with `Σ ξ = m`.
pub fn linear_pred_problem(spec: &RcrSpec) -> Result<CbrcProblem> {
    spec.validate()?;
    let a = match &spec.criterion {
        RcrCriterion::Linear(a) => a.clone(),
        RcrCriterion::Imse(_) => {
            return Err(Error::Domain("expected a linear criterion specification".into()))
        }
    };
    build_prediction_problem(spec, a)
}

/// IMSE criterion: the linear criterion with `A = V`.
pub fn imse_problem(spec: &RcrSpec) -> Result<CbrcProblem> {
    spec.validate()?;
    let nu = match &spec.criterion {
        RcrCriterion::Imse(nu) => nu,
        RcrCriterion::Linear(_) => {
            return Err(Error::Domain("expected an IMSE criterion specification".into()))
        }
    };
    let v = integrated_moment_matrix(&spec.regression, nu)?;
    build_prediction_problem(spec, v)
}

/// `V = Σ_x ν(x) f(x) f(x)ᵀ`; must be positive definite.
pub fn integrated_moment_matrix(regression: &RegressionMap, nu: &[f64]) -> Result<SymMatrix> {
    if nu.len() != regression.len() {
        return Err(Error::Dimension(format!(
            "measure has {} entries, design space has {} points",
            nu.len(),
            regression.len()
        )));
    }
    if let Some(v) = nu.iter().find(|v| !v.is_finite() || **v < 0.0) {
        return Err(Error::Domain(format!("measure weight {v} is negative")));
    }
    let v = SymMatrix::gram(regression.dim(), nu.iter().copied().zip(regression.vectors()));
    cholesky(&v).map_err(|_| {
        Error::Domain("integrated moment matrix V is singular; the measure needs more support".into())
    })?;
    Ok(v)
}

/// `ν(x) = 1/d` on every point.
pub fn uniform_measure(d: usize) -> Vec<f64> {
    vec![1.0 / d as f64; d]
}

fn build_prediction_problem(spec: &RcrSpec, a: SymMatrix) -> Result<CbrcProblem> {
    cholesky(&a).map_err(|_| Error::Domain("weight matrix A is not positive definite".into()))?;
    let d_inv = spd_inverse(&spec.dispersion)
        .map_err(|_| Error::Domain("dispersion matrix D is not positive definite".into()))?;
    let p = spec.regression.dim();
    let terms = vec![
        BayesTerm::new(SymMatrix::zeros(p), a.clone()),
        BayesTerm::new(d_inv, a.scaled((spec.individuals - 1) as f64)),
    ];
    let constraints = LinearConstraintSet::unconstrained(spec.space.len())
        .with_total_trials(Relation::Eq, spec.trials as f64);
    CbrcProblem::new(spec.space.clone(), spec.regression.clone(), terms, constraints)
}

/// `δ = ρ / (1 − ρ)`.
pub fn slope_variance(rho: f64) -> Result<f64> {
    if !(rho > 0.0 && rho < 1.0) {
        return Err(Error::Domain(format!("rescaled slope variance {rho} is outside (0, 1)")));
    }
    Ok(rho / (1.0 - rho))
}

/// `{k/(d−1) : k = 0..d−1}`, labeled by coordinate.
pub fn unit_grid(d: usize) -> Result<DesignSpace> {
    if d < 2 {
        return Err(Error::Domain(format!("grid needs at least two points, got {d}")));
    }
    let coords: Vec<f64> = (0..d).map(|k| k as f64 / (d - 1) as f64).collect();
    DesignSpace::from_coordinates(&coords)
}

/// `ξ(x_k) + ξ(x_{k+1}) + ξ(x_{k+2}) ≤ 1` for `k = 0..d−3`.
pub fn neighbour_triple_rows(d: usize) -> Vec<ConstraintRow> {
    (0..d.saturating_sub(2))
        .map(|k| {
            let mut c = vec![0.0; d];
            c[k..k + 3].fill(1.0);
            ConstraintRow::new(c, Relation::Le, 1.0)
        })
        .collect()
}

/// Straight-line model on the unit grid with IMSE criterion.
#[derive(Clone, Debug, PartialEq)]
pub struct LineExample {
    pub grid_size: usize,
    pub individuals: usize,
    pub trials: usize,
    pub intercept_dispersion: f64,
    pub rho: f64,
    /// At most one trial within every triple of neighbouring points.
    pub spacing_rows: bool,
}

impl LineExample {
    pub fn new(rho: f64, spacing_rows: bool) -> Self {
        Self {
            grid_size: EXAMPLE_GRID_SIZE,
            individuals: EXAMPLE_INDIVIDUALS,
            trials: EXAMPLE_TRIALS,
            intercept_dispersion: EXAMPLE_INTERCEPT_DISPERSION,
            rho,
            spacing_rows,
        }
    }

    pub fn spec(&self) -> Result<RcrSpec> {
        let delta = slope_variance(self.rho)?;
        let space = unit_grid(self.grid_size)?;
        let regression = RegressionMap::polynomial(&space, 1)?;
        Ok(RcrSpec {
            criterion: RcrCriterion::Imse(uniform_measure(space.len())),
            space,
            regression,
            individuals: self.individuals,
            trials: self.trials,
            dispersion: SymMatrix::from_diagonal(&[self.intercept_dispersion, delta]),
        })
    }

    pub fn problem(&self) -> Result<CbrcProblem> {
        let problem = imse_problem(&self.spec()?)?;
        if !self.spacing_rows {
            return Ok(problem);
        }
        if self.grid_size < 3 {
            return Err(Error::Domain("neighbour rows need at least three grid points".into()));
        }
        let mut cons = problem.constraints().clone();
        for row in neighbour_triple_rows(self.grid_size) {
            cons.add_row(row)?;
        }
        problem.with_constraints(cons)
    }
}

/// The straight-line IMSE example: `d = 51`, `n = 100`, `m = 10`,
/// `D = diag(0.01, ρ/(1−ρ))`, uniform measure, optionally with the
/// neighbour-triple rows.
pub fn paper_example(rho: f64, with_constraint10: bool) -> Result<CbrcProblem> {
    LineExample::new(rho, with_constraint10).problem()
}
