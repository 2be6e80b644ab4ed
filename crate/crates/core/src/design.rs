//! Finite design spaces, designs and information matrices.

use std::cmp::Ordering;
use std::collections::HashSet;
use std::fmt;

use nalgebra::DVector;

use crate::error::{Error, Result};
use crate::linalg::{numerical_rank, SymMatrix};

/// A labeled point of a finite design space.
#[derive(Clone, Debug, PartialEq)]
pub struct DesignPoint {
    pub label: String,
    pub coordinate: Vec<f64>,
}

impl DesignPoint {
    pub fn new(label: impl Into<String>, coordinate: Vec<f64>) -> Self {
        Self {
            label: label.into(),
            coordinate,
        }
    }
}

/// Ordered, nonempty set of uniquely labeled design points.
#[derive(Clone, Debug, PartialEq)]
pub struct DesignSpace {
    points: Vec<DesignPoint>,
}

impl DesignSpace {
    pub fn new(points: Vec<DesignPoint>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::Domain("design space must contain at least one point".into()));
        }
        let mut seen = HashSet::new();
        for p in &points {
            if !seen.insert(p.label.as_str()) {
                return Err(Error::Domain(format!("duplicate design point label {:?}", p.label)));
            }
        }
        Ok(Self { points })
    }

    /// One-dimensional space with coordinates as labels.
    pub fn from_coordinates(coords: &[f64]) -> Result<Self> {
        Self::new(
            coords
                .iter()
                .map(|&x| DesignPoint::new(format!("{x}"), vec![x]))
                .collect(),
        )
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[DesignPoint] {
        &self.points
    }

    pub fn point(&self, i: usize) -> &DesignPoint {
        &self.points[i]
    }

    pub fn index_of(&self, label: &str) -> Option<usize> {
        self.points.iter().position(|p| p.label == label)
    }
}

/// Trial allocation over a design space, stored densely by point index.
///
/// Approximate designs carry arbitrary nonnegative weights; exact designs
/// carry integers.
#[derive(Clone, Debug, PartialEq)]
pub struct Design {
    weights: Vec<f64>,
}

impl Design {
    pub fn new(weights: Vec<f64>) -> Result<Self> {
        if let Some((i, w)) = weights
            .iter()
            .enumerate()
            .find(|(_, w)| !w.is_finite() || **w < 0.0)
        {
            return Err(Error::Domain(format!("design weight {w} at point {i} is not a nonnegative number")));
        }
        Ok(Self { weights })
    }

    /// Design with small negative roundoff (`> -tol`) clamped to zero.
    pub fn from_solver(weights: &[f64], tol: f64) -> Result<Self> {
        let clamped = weights
            .iter()
            .map(|&w| if w < 0.0 && w > -tol { 0.0 } else { w })
            .collect();
        Self::new(clamped)
    }

    pub fn zeros(n: usize) -> Self {
        Self { weights: vec![0.0; n] }
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn weight(&self, i: usize) -> f64 {
        self.weights[i]
    }

    pub fn total(&self) -> f64 {
        self.weights.iter().sum()
    }

    /// Every weight within `tol` of an integer.
    pub fn is_integral(&self, tol: f64) -> bool {
        self.weights.iter().all(|w| (w - w.round()).abs() <= tol)
    }

    pub fn rounded(&self) -> Self {
        Self {
            weights: self.weights.iter().map(|w| w.round()).collect(),
        }
    }

    /// Indices with weight above `tol`.
    pub fn support(&self, tol: f64) -> Vec<usize> {
        (0..self.len()).filter(|&i| self.weights[i] > tol).collect()
    }

    /// Convex combination `α·self + (1-α)·other`.
    pub fn mix(&self, other: &Design, alpha: f64) -> Result<Design> {
        if self.len() != other.len() {
            return Err(Error::Dimension("designs over different spaces".into()));
        }
        Design::new(
            self.weights
                .iter()
                .zip(&other.weights)
                .map(|(a, b)| alpha * a + (1.0 - alpha) * b)
                .collect(),
        )
    }

    #[allow(dead_code)]
    pub(crate) fn weights_mut(&mut self) -> &mut [f64] {
        &mut self.weights
    }
}

/// Regression vectors `f(x) ∈ Rᵖ`, one per design point.
#[derive(Clone, Debug, PartialEq)]
pub struct RegressionMap {
    dim: usize,
    vectors: Vec<DVector<f64>>,
}

impl RegressionMap {
    /// Requires the vectors to span `Rᵖ`.
    pub fn new(vectors: Vec<Vec<f64>>) -> Result<Self> {
        let dim = vectors.first().map(Vec::len).unwrap_or(0);
        if dim == 0 {
            return Err(Error::Domain("regression vectors must be nonempty".into()));
        }
        if let Some(i) = vectors.iter().position(|v| v.len() != dim) {
            return Err(Error::Dimension(format!(
                "regression vector {i} has length {}, expected {dim}",
                vectors[i].len()
            )));
        }
        if vectors.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::Domain("regression vectors contain non-finite entries".into()));
        }
        let map = Self {
            dim,
            vectors: vectors.into_iter().map(DVector::from_vec).collect(),
        };
        let gram = SymMatrix::gram(dim, map.vectors.iter().map(|v| (1.0, v)));
        let rank = numerical_rank(&gram)?;
        if rank < dim {
            return Err(Error::Domain(format!(
                "regression vectors span a {rank}-dimensional subspace of R^{dim}"
            )));
        }
        Ok(map)
    }

    /// Evaluates `f` at every point of `space`.
    pub fn from_fn(space: &DesignSpace, f: impl Fn(&DesignPoint) -> Vec<f64>) -> Result<Self> {
        Self::new(space.points().iter().map(f).collect())
    }

    /// `(1, x, x², …, x^degree)` in the first coordinate.
    pub fn polynomial(space: &DesignSpace, degree: usize) -> Result<Self> {
        if let Some(p) = space.points().iter().find(|p| p.coordinate.is_empty()) {
            return Err(Error::Domain(format!("point {:?} has no coordinate", p.label)));
        }
        Self::from_fn(space, |p| {
            let x = p.coordinate[0];
            (0..=degree).map(|k| x.powi(k as i32)).collect()
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    pub fn vector(&self, i: usize) -> &DVector<f64> {
        &self.vectors[i]
    }

    pub fn vectors(&self) -> &[DVector<f64>] {
        &self.vectors
    }

    /// `M(ξ) = Σ ξ(x) f(x) f(x)ᵀ`.
    pub fn information_matrix(&self, design: &Design) -> Result<SymMatrix> {
        if design.len() != self.len() {
            return Err(Error::Dimension(format!(
                "design has {} weights, regression map has {} points",
                design.len(),
                self.len()
            )));
        }
        Ok(SymMatrix::gram(
            self.dim,
            design.weights().iter().copied().zip(&self.vectors),
        ))
    }
}

/// `M(ξ) = Σ ξ(x) f(x) f(x)ᵀ`.
pub fn information_matrix(design: &Design, f: &RegressionMap) -> Result<SymMatrix> {
    f.information_matrix(design)
}

/// Criterion value; singular information yields [`CriterionValue::Infinite`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum CriterionValue {
    Finite(f64),
    Infinite,
}

impl CriterionValue {
    pub fn is_finite(&self) -> bool {
        matches!(self, CriterionValue::Finite(_))
    }

    pub fn finite(&self) -> Option<f64> {
        match *self {
            CriterionValue::Finite(v) => Some(v),
            CriterionValue::Infinite => None,
        }
    }

    /// Finite values order numerically; infinite is largest.
    pub fn total_cmp(&self, other: &Self) -> Ordering {
        match (self, other) {
            (CriterionValue::Finite(a), CriterionValue::Finite(b)) => a.total_cmp(b),
            (CriterionValue::Finite(_), CriterionValue::Infinite) => Ordering::Less,
            (CriterionValue::Infinite, CriterionValue::Finite(_)) => Ordering::Greater,
            (CriterionValue::Infinite, CriterionValue::Infinite) => Ordering::Equal,
        }
    }
}

impl fmt::Display for CriterionValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CriterionValue::Finite(v) => write!(f, "{v}"),
            CriterionValue::Infinite => write!(f, "+inf"),
        }
    }
}
