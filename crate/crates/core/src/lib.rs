//! Optimal experimental designs on finite design spaces under the compound
//! Bayes risk criterion `Φ(ξ) = Σ_j tr((M(ξ) + B_j)⁻¹ H_j)`.
//!
//! The criterion is minimized by rewriting it as A-optimality on an
//! artificial model with linear coupling constraints ([`reduction`]), which
//! is then solved as a second-order cone program ([`conic`]) for
//! approximate designs, or by branch-and-bound over that cone relaxation
//! ([`exact`]) for exact designs.

pub mod conic;
pub mod constraints;
pub mod design;
pub mod error;
pub mod exact;
pub mod linalg;
pub mod oracle;
pub mod problem;
pub mod rcr;
pub mod reduction;
pub mod sweep;

pub use constraints::{ConstraintRow, LinearConstraintSet, Relation};
pub use design::{information_matrix, CriterionValue, Design, DesignPoint, DesignSpace, RegressionMap};
pub use error::{Error, Result};
pub use exact::{solve_exact, BnbOptions, BnbResult, BnbStatus};
pub use linalg::SymMatrix;
pub use problem::{BayesTerm, CbrcProblem};
pub use rcr::paper_example;
pub use reduction::{build_artificial, ArtificialProblem};
pub use conic::{solve_approximate, ApproximateDesign};
