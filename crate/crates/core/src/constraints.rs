//! Linear constraints on designs.

use std::fmt;

use crate::design::Design;
use crate::error::{Error, Result};

/// Default absolute feasibility tolerance.
pub const FEASIBILITY_TOL: f64 = 1e-7;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Relation {
    Le,
    Eq,
    Ge,
}

impl Relation {
    /// Whether `lhs ⋈ rhs` holds within `tol`.
    pub fn holds(self, lhs: f64, rhs: f64, tol: f64) -> bool {
        match self {
            Relation::Le => lhs <= rhs + tol,
            Relation::Eq => (lhs - rhs).abs() <= tol,
            Relation::Ge => lhs >= rhs - tol,
        }
    }
}

impl fmt::Display for Relation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Relation::Le => "<=",
            Relation::Eq => "=",
            Relation::Ge => ">=",
        })
    }
}

/// `Σ coefficients[x]·ξ(x) ⋈ rhs`.
#[derive(Clone, Debug, PartialEq)]
pub struct ConstraintRow {
    pub coefficients: Vec<f64>,
    pub relation: Relation,
    pub rhs: f64,
}

impl ConstraintRow {
    pub fn new(coefficients: Vec<f64>, relation: Relation, rhs: f64) -> Self {
        Self {
            coefficients,
            relation,
            rhs,
        }
    }

    pub fn lhs(&self, weights: &[f64]) -> f64 {
        self.coefficients.iter().zip(weights).map(|(a, w)| a * w).sum()
    }
}

/// Set of permissible designs: rows, optional total-trials condition,
/// per-point bounds and an integrality flag.
#[derive(Clone, Debug, PartialEq)]
pub struct LinearConstraintSet {
    n_points: usize,
    rows: Vec<ConstraintRow>,
    total_trials: Option<(Relation, f64)>,
    lower: Vec<f64>,
    upper: Vec<f64>,
    integrality: bool,
}

impl LinearConstraintSet {
    /// Only nonnegativity.
    pub fn unconstrained(n_points: usize) -> Self {
        Self {
            n_points,
            rows: Vec::new(),
            total_trials: None,
            lower: vec![0.0; n_points],
            upper: vec![f64::INFINITY; n_points],
            integrality: false,
        }
    }

    pub fn with_total_trials(mut self, relation: Relation, value: f64) -> Self {
        self.total_trials = Some((relation, value));
        self
    }

    pub fn with_row(mut self, row: ConstraintRow) -> Result<Self> {
        self.add_row(row)?;
        Ok(self)
    }

    pub fn with_integrality(mut self, integral: bool) -> Self {
        self.integrality = integral;
        self
    }

    pub fn add_row(&mut self, row: ConstraintRow) -> Result<()> {
        if row.coefficients.len() != self.n_points {
            return Err(Error::Dimension(format!(
                "constraint row has {} coefficients, design space has {} points",
                row.coefficients.len(),
                self.n_points
            )));
        }
        if row.coefficients.iter().any(|c| !c.is_finite()) || !row.rhs.is_finite() {
            return Err(Error::Domain("constraint row has non-finite data".into()));
        }
        self.rows.push(row);
        Ok(())
    }

    /// Per-point bounds; `upper` entries may be `+∞`.
    pub fn with_bounds(mut self, lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        if lower.len() != self.n_points || upper.len() != self.n_points {
            return Err(Error::Dimension("bounds must have one entry per design point".into()));
        }
        for (i, (&lo, &hi)) in lower.iter().zip(&upper).enumerate() {
            if !lo.is_finite() || lo < 0.0 || hi.is_nan() || lo > hi {
                return Err(Error::Domain(format!("invalid bounds [{lo}, {hi}] at point {i}")));
            }
        }
        self.lower = lower;
        self.upper = upper;
        Ok(self)
    }

    pub fn n_points(&self) -> usize {
        self.n_points
    }

    pub fn rows(&self) -> &[ConstraintRow] {
        &self.rows
    }

    pub fn total_trials(&self) -> Option<(Relation, f64)> {
        self.total_trials
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    pub fn integrality(&self) -> bool {
        self.integrality
    }

    /// All rows including the total-trials condition as an explicit row.
    pub fn all_rows(&self) -> Vec<ConstraintRow> {
        let mut rows = self.rows.clone();
        if let Some((rel, value)) = self.total_trials {
            rows.push(ConstraintRow::new(vec![1.0; self.n_points], rel, value));
        }
        rows
    }

    pub fn check_feasible(&self, design: &Design, tol: f64) -> FeasibilityReport {
        let mut violations = Vec::new();
        if design.len() != self.n_points {
            violations.push(Violation::Dimension {
                expected: self.n_points,
                got: design.len(),
            });
            return FeasibilityReport { violations };
        }
        let w = design.weights();
        for (index, row) in self.rows.iter().enumerate() {
            let lhs = row.lhs(w);
            if !row.relation.holds(lhs, row.rhs, tol) {
                violations.push(Violation::Row {
                    index,
                    lhs,
                    relation: row.relation,
                    rhs: row.rhs,
                });
            }
        }
        if let Some((relation, value)) = self.total_trials {
            let total = design.total();
            if !relation.holds(total, value, tol) {
                violations.push(Violation::TotalTrials {
                    total,
                    relation,
                    value,
                });
            }
        }
        for (point, &v) in w.iter().enumerate() {
            if v < self.lower[point] - tol {
                violations.push(Violation::LowerBound {
                    point,
                    value: v,
                    bound: self.lower[point],
                });
            }
            if v > self.upper[point] + tol {
                violations.push(Violation::UpperBound {
                    point,
                    value: v,
                    bound: self.upper[point],
                });
            }
            if self.integrality && (v - v.round()).abs() > tol {
                violations.push(Violation::Integrality { point, value: v });
            }
        }
        FeasibilityReport { violations }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Violation {
    Dimension { expected: usize, got: usize },
    Row { index: usize, lhs: f64, relation: Relation, rhs: f64 },
    TotalTrials { total: f64, relation: Relation, value: f64 },
    LowerBound { point: usize, value: f64, bound: f64 },
    UpperBound { point: usize, value: f64, bound: f64 },
    Integrality { point: usize, value: f64 },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::Dimension { expected, got } => {
                write!(f, "design has {got} weights, expected {expected}")
            }
            Violation::Row { index, lhs, relation, rhs } => {
                write!(f, "row {index}: {lhs} {relation} {rhs} violated")
            }
            Violation::TotalTrials { total, relation, value } => {
                write!(f, "total trials: {total} {relation} {value} violated")
            }
            Violation::LowerBound { point, value, bound } => {
                write!(f, "point {point}: weight {value} below lower bound {bound}")
            }
            Violation::UpperBound { point, value, bound } => {
                write!(f, "point {point}: weight {value} above upper bound {bound}")
            }
            Violation::Integrality { point, value } => {
                write!(f, "point {point}: weight {value} is not integral")
            }
        }
    }
}

/// Outcome of [`LinearConstraintSet::check_feasible`].
#[derive(Clone, Debug, Default, PartialEq)]
pub struct FeasibilityReport {
    pub violations: Vec<Violation>,
}

impl FeasibilityReport {
    pub fn is_feasible(&self) -> bool {
        self.violations.is_empty()
    }
}
