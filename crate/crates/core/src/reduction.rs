//! Reformulation of a compound Bayes risk problem as linearly constrained
//! A-optimality on an artificial model.
//!
//! For each term `j` the loss matrix is factored as `H_j = K_j K_jᵀ` and the
//! whitened prior `K_j⁻¹ B_j K_j⁻ᵀ` is split into rank-one pieces
//! `Σ_k u_{jk} u_{jk}ᵀ`. The artificial design space holds `s` copies of the
//! original space plus one auxiliary point per rank-one piece. The copy
//! `(j, x)` carries `K_j⁻¹ f(x)` in the `j`-th `p`-block of an `s·p` vector,
//! auxiliary points carry `u_{jk}` in block `j`.
//!
//! When copy weights are coupled (`ξ̃(j,x) = ξ̃(1,x)`) and auxiliary weights
//! are fixed to one, the artificial information matrix is block diagonal
//! with blocks `K_j⁻¹ (M(ξ) + B_j) K_j⁻ᵀ`, so its trace inverse equals the
//! original criterion.

use nalgebra::DVector;

use crate::constraints::{ConstraintRow, LinearConstraintSet, Relation, FEASIBILITY_TOL};
use crate::design::{CriterionValue, Design};
use crate::error::{Error, Result};
use crate::linalg::{cholesky, sym_eig, trace_of_inverse_product, LowerTriangular, SymMatrix};
use crate::problem::CbrcProblem;

/// A point of the artificial design space.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ExtendedPoint {
    /// Copy of original point `point` inside block `block`.
    Copy { block: usize, point: usize },
    /// The `index`-th rank-one piece of block `block`'s prior.
    Auxiliary { block: usize, index: usize },
}

impl ExtendedPoint {
    pub fn block(&self) -> usize {
        match *self {
            ExtendedPoint::Copy { block, .. } | ExtendedPoint::Auxiliary { block, .. } => block,
        }
    }
}

#[derive(Clone, Debug)]
pub struct ArtificialProblem {
    base: CbrcProblem,
    points: Vec<ExtendedPoint>,
    regression: Vec<DVector<f64>>,
    factors: Vec<LowerTriangular>,
    aux_vectors: Vec<Vec<DVector<f64>>>,
    constraints: LinearConstraintSet,
}

pub fn build_artificial(problem: &CbrcProblem) -> Result<ArtificialProblem> {
    let s = problem.terms().len();
    let p = problem.dim();
    let d = problem.n_points();

    let mut factors = Vec::with_capacity(s);
    let mut aux_vectors = Vec::with_capacity(s);
    for (j, term) in problem.terms().iter().enumerate() {
        let k = cholesky(&term.loss).map_err(|_| {
            Error::Domain(format!("term {j}: loss matrix is not positive definite"))
        })?;
        let whitened = k.whiten(&term.prior);
        let eig = sym_eig(&whitened)?;
        let threshold = p as f64 * f64::EPSILON * eig.values[0];
        let pieces = eig
            .values
            .iter()
            .enumerate()
            .filter(|(_, &l)| l > 0.0 && l >= threshold)
            .map(|(idx, &l)| eig.vector(idx) * l.sqrt())
            .collect::<Vec<_>>();
        factors.push(k);
        aux_vectors.push(pieces);
    }

    let mut points = Vec::new();
    let mut regression = Vec::new();
    for (j, k) in factors.iter().enumerate() {
        for x in 0..d {
            points.push(ExtendedPoint::Copy { block: j, point: x });
            let local = k.solve_vector(problem.regression().vector(x));
            regression.push(embed(s, p, j, &local));
        }
    }
    for (j, pieces) in aux_vectors.iter().enumerate() {
        for (index, u) in pieces.iter().enumerate() {
            points.push(ExtendedPoint::Auxiliary { block: j, index });
            regression.push(embed(s, p, j, u));
        }
    }

    let constraints = lift_constraints(problem.constraints(), s, d, points.len());
    Ok(ArtificialProblem {
        base: problem.clone(),
        points,
        regression,
        factors,
        aux_vectors,
        constraints,
    })
}

fn embed(s: usize, p: usize, block: usize, local: &DVector<f64>) -> DVector<f64> {
    let mut v = DVector::zeros(s * p);
    v.rows_mut(block * p, p).copy_from(local);
    v
}

/// Base constraints on block 0, coupling rows for blocks 1.., auxiliary weights fixed at one.
fn lift_constraints(base: &LinearConstraintSet, s: usize, d: usize, n: usize) -> LinearConstraintSet {
    let mut lower = vec![0.0; n];
    let mut upper = vec![f64::INFINITY; n];
    lower[..d].copy_from_slice(base.lower());
    upper[..d].copy_from_slice(base.upper());
    for i in s * d..n {
        lower[i] = 1.0;
        upper[i] = 1.0;
    }
    let mut set = LinearConstraintSet::unconstrained(n)
        .with_bounds(lower, upper)
        .expect("lifted bounds are consistent")
        .with_integrality(base.integrality());
    let pad = |coeffs: &[f64]| {
        let mut c = vec![0.0; n];
        c[..d].copy_from_slice(coeffs);
        c
    };
    for row in base.all_rows() {
        set.add_row(ConstraintRow::new(pad(&row.coefficients), row.relation, row.rhs))
            .expect("lifted row has matching length");
    }
    for j in 1..s {
        for x in 0..d {
            let mut c = vec![0.0; n];
            c[j * d + x] = 1.0;
            c[x] = -1.0;
            set.add_row(ConstraintRow::new(c, Relation::Eq, 0.0))
                .expect("coupling row has matching length");
        }
    }
    set
}

impl ArtificialProblem {
    pub fn base(&self) -> &CbrcProblem {
        &self.base
    }

    pub fn blocks(&self) -> usize {
        self.factors.len()
    }

    pub fn block_dim(&self) -> usize {
        self.base.dim()
    }

    /// Dimension `s·p` of the artificial regression vectors.
    pub fn dim(&self) -> usize {
        self.blocks() * self.block_dim()
    }

    pub fn points(&self) -> &[ExtendedPoint] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn regression(&self, i: usize) -> &DVector<f64> {
        &self.regression[i]
    }

    /// Ranks of the priors `B_j`, i.e. the number of auxiliary points per block.
    pub fn ranks(&self) -> Vec<usize> {
        self.aux_vectors.iter().map(Vec::len).collect()
    }

    pub fn factor(&self, j: usize) -> &LowerTriangular {
        &self.factors[j]
    }

    pub fn aux_vectors(&self, j: usize) -> &[DVector<f64>] {
        &self.aux_vectors[j]
    }

    pub fn constraints(&self) -> &LinearConstraintSet {
        &self.constraints
    }

    /// Index of the copy `(block, point)` in the extended space.
    pub fn copy_index(&self, block: usize, point: usize) -> usize {
        block * self.base.n_points() + point
    }

    pub fn label(&self, i: usize) -> String {
        match self.points[i] {
            ExtendedPoint::Copy { block, point } => {
                format!("({}, {})", block + 1, self.base.space().point(point).label)
            }
            ExtendedPoint::Auxiliary { block, index } => format!("y[{}][{}]", block + 1, index + 1),
        }
    }

    /// `M̃(ξ̃) = Σ ξ̃(x̃) f̃(x̃) f̃(x̃)ᵀ`.
    pub fn information_matrix(&self, design: &Design) -> Result<SymMatrix> {
        if design.len() != self.len() {
            return Err(Error::Dimension(format!(
                "design has {} weights, artificial space has {} points",
                design.len(),
                self.len()
            )));
        }
        Ok(SymMatrix::gram(
            self.dim(),
            design.weights().iter().copied().zip(&self.regression),
        ))
    }

    /// A-criterion `tr(M̃(ξ̃)⁻¹)` of the artificial model.
    pub fn a_criterion(&self, design: &Design) -> Result<CriterionValue> {
        let m = self.information_matrix(design)?;
        match trace_of_inverse_product(&m, &SymMatrix::identity(self.dim())) {
            Ok(v) => Ok(CriterionValue::Finite(v)),
            Err(Error::Singular { .. }) => Ok(CriterionValue::Infinite),
            Err(e) => Err(e),
        }
    }

    /// The unique artificial design that satisfies the coupling and fixed
    /// weights and restricts to `design` on block 1.
    pub fn lift(&self, design: &Design) -> Result<Design> {
        let d = self.base.n_points();
        if design.len() != d {
            return Err(Error::Dimension(format!(
                "design has {} weights, base space has {d} points",
                design.len()
            )));
        }
        let weights = self
            .points
            .iter()
            .map(|pt| match *pt {
                ExtendedPoint::Copy { point, .. } => design.weight(point),
                ExtendedPoint::Auxiliary { .. } => 1.0,
            })
            .collect();
        Design::new(weights)
    }

    /// Restriction `ξ̃(1, ·)` of a feasible artificial design.
    pub fn recover_design(&self, design: &Design) -> Result<Design> {
        self.recover_design_with_tol(design, FEASIBILITY_TOL)
    }

    pub fn recover_design_with_tol(&self, design: &Design, tol: f64) -> Result<Design> {
        if design.len() != self.len() {
            return Err(Error::Dimension(format!(
                "design has {} weights, artificial space has {} points",
                design.len(),
                self.len()
            )));
        }
        let d = self.base.n_points();
        for (i, pt) in self.points.iter().enumerate() {
            let w = design.weight(i);
            match *pt {
                ExtendedPoint::Copy { block, point } if block > 0 => {
                    let anchor = design.weight(point);
                    if (w - anchor).abs() > tol {
                        return Err(Error::Infeasible(format!(
                            "coupling violated at {}: {w} != {anchor}",
                            self.label(i)
                        )));
                    }
                }
                ExtendedPoint::Auxiliary { .. } => {
                    if (w - 1.0).abs() > tol {
                        return Err(Error::Infeasible(format!(
                            "auxiliary weight at {} is {w}, expected 1",
                            self.label(i)
                        )));
                    }
                }
                ExtendedPoint::Copy { .. } => {}
            }
        }
        Design::new(design.weights()[..d].to_vec())
    }
}
