//! The compound Bayes risk criterion
//! `Φ(ξ) = Σ_j tr((M(ξ) + B_j)⁻¹ H_j)` and the problem that carries it.

use crate::constraints::LinearConstraintSet;
use crate::design::{CriterionValue, Design, DesignSpace, RegressionMap};
use crate::error::{Error, Result};
use crate::linalg::{cholesky, sym_eig, trace_of_inverse_product, SymMatrix};

/// One summand: prior information `B` (nonnegative definite) and loss weight `H` (positive definite).
#[derive(Clone, Debug, PartialEq)]
pub struct BayesTerm {
    pub prior: SymMatrix,
    pub loss: SymMatrix,
}

impl BayesTerm {
    pub fn new(prior: SymMatrix, loss: SymMatrix) -> Self {
        Self { prior, loss }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CbrcProblem {
    space: DesignSpace,
    regression: RegressionMap,
    terms: Vec<BayesTerm>,
    constraints: LinearConstraintSet,
}

impl CbrcProblem {
    pub fn new(
        space: DesignSpace,
        regression: RegressionMap,
        terms: Vec<BayesTerm>,
        constraints: LinearConstraintSet,
    ) -> Result<Self> {
        if regression.len() != space.len() {
            return Err(Error::Dimension(format!(
                "regression map has {} points, design space has {}",
                regression.len(),
                space.len()
            )));
        }
        if constraints.n_points() != space.len() {
            return Err(Error::Dimension(format!(
                "constraints cover {} points, design space has {}",
                constraints.n_points(),
                space.len()
            )));
        }
        if terms.is_empty() {
            return Err(Error::Domain("at least one criterion term is required".into()));
        }
        let p = regression.dim();
        for (j, term) in terms.iter().enumerate() {
            if term.prior.dim() != p || term.loss.dim() != p {
                return Err(Error::Dimension(format!(
                    "term {j}: matrices must be {p}x{p}"
                )));
            }
            check_nonnegative_definite(&term.prior)
                .map_err(|e| Error::Domain(format!("term {j}: prior matrix {e}")))?;
            cholesky(&term.loss).map_err(|_| {
                Error::Domain(format!("term {j}: loss matrix is not positive definite"))
            })?;
        }
        Ok(Self {
            space,
            regression,
            terms,
            constraints,
        })
    }

    /// Plain A-optimality: a single term with `B = 0`, `H = I`.
    pub fn a_optimality(
        space: DesignSpace,
        regression: RegressionMap,
        constraints: LinearConstraintSet,
    ) -> Result<Self> {
        let p = regression.dim();
        let term = BayesTerm::new(SymMatrix::zeros(p), SymMatrix::identity(p));
        Self::new(space, regression, vec![term], constraints)
    }

    pub fn space(&self) -> &DesignSpace {
        &self.space
    }

    pub fn regression(&self) -> &RegressionMap {
        &self.regression
    }

    pub fn terms(&self) -> &[BayesTerm] {
        &self.terms
    }

    pub fn constraints(&self) -> &LinearConstraintSet {
        &self.constraints
    }

    pub fn dim(&self) -> usize {
        self.regression.dim()
    }

    pub fn n_points(&self) -> usize {
        self.space.len()
    }

    /// Same criterion, different permissible set.
    pub fn with_constraints(&self, constraints: LinearConstraintSet) -> Result<Self> {
        if constraints.n_points() != self.n_points() {
            return Err(Error::Dimension("constraints do not match the design space".into()));
        }
        Ok(Self {
            constraints,
            ..self.clone()
        })
    }

    /// Per-term values `tr((M(ξ)+B_j)⁻¹ H_j)`.
    pub fn term_values(&self, design: &Design) -> Result<Vec<CriterionValue>> {
        let m = self.regression.information_matrix(design)?;
        self.terms
            .iter()
            .map(|term| {
                let total = m.sum(&term.prior)?;
                Ok(match trace_of_inverse_product(&total, &term.loss) {
                    Ok(v) => CriterionValue::Finite(v),
                    Err(Error::Singular { .. }) => CriterionValue::Infinite,
                    Err(e) => return Err(e),
                })
            })
            .collect()
    }

    /// `Φ(ξ)`, infinite whenever some `M(ξ) + B_j` is numerically singular.
    pub fn cbrc_value(&self, design: &Design) -> Result<CriterionValue> {
        let mut sum = 0.0;
        for v in self.term_values(design)? {
            match v {
                CriterionValue::Finite(x) => sum += x,
                CriterionValue::Infinite => return Ok(CriterionValue::Infinite),
            }
        }
        Ok(CriterionValue::Finite(sum))
    }

    /// Folds positive weights into the loss matrices (`H_j → w_j H_j`).
    pub fn apply_weights(&self, weights: &[f64]) -> Result<Self> {
        if weights.len() != self.terms.len() {
            return Err(Error::Dimension(format!(
                "{} weights for {} terms",
                weights.len(),
                self.terms.len()
            )));
        }
        if let Some(w) = weights.iter().find(|w| !(**w > 0.0) || !w.is_finite()) {
            return Err(Error::Domain(format!("term weight {w} must be positive")));
        }
        let terms = self
            .terms
            .iter()
            .zip(weights)
            .map(|(t, &w)| BayesTerm::new(t.prior.clone(), t.loss.scaled(w)))
            .collect();
        Self::new(
            self.space.clone(),
            self.regression.clone(),
            terms,
            self.constraints.clone(),
        )
    }
}

/// `λ_min ≥ -1e-10 · max(1, λ_max)`.
fn check_nonnegative_definite(m: &SymMatrix) -> std::result::Result<(), String> {
    let eig = sym_eig(m).map_err(|e| e.to_string())?;
    let lmax = eig.values[0];
    let lmin = *eig.values.last().expect("dim >= 1");
    if lmin < -1e-10 * lmax.max(1.0) {
        return Err(format!("is not nonnegative definite (min eigenvalue {lmin:e})"));
    }
    Ok(())
}
