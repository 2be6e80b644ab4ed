//! Dense symmetric linear algebra kernels.
//!
//! Everything here is factorization based. Library code never forms an
//! explicit inverse to evaluate a trace form; [`spd_inverse`] exists only to
//! turn user supplied covariance matrices into prior-information matrices.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};

/// Relative tolerance for the symmetry check on construction.
const SYMMETRY_TOL: f64 = 1e-12;

/// Dense real symmetric matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct SymMatrix(DMatrix<f64>);

impl SymMatrix {
    /// Wraps a square matrix after checking symmetry to `1e-12` relative.
    ///
    /// The stored matrix is the exact symmetrization `(m + mᵀ)/2`.
    pub fn new(m: DMatrix<f64>) -> Result<Self> {
        if m.nrows() != m.ncols() {
            return Err(Error::Dimension(format!(
                "matrix is {}x{}, expected square",
                m.nrows(),
                m.ncols()
            )));
        }
        if m.nrows() == 0 {
            return Err(Error::Dimension("matrix must have dimension >= 1".into()));
        }
        if m.iter().any(|v| !v.is_finite()) {
            return Err(Error::Domain("matrix has non-finite entries".into()));
        }
        let scale = m.amax().max(f64::MIN_POSITIVE);
        let asym = (&m - m.transpose()).amax();
        if asym > SYMMETRY_TOL * scale {
            return Err(Error::Domain(format!(
                "matrix is not symmetric (max asymmetry {asym:e})"
            )));
        }
        Ok(Self::symmetrized(m))
    }

    fn symmetrized(m: DMatrix<f64>) -> Self {
        let t = m.transpose();
        SymMatrix((m + t) * 0.5)
    }

    /// Builds from row-major nested vectors.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        if rows.iter().any(|r| r.len() != n) {
            return Err(Error::Dimension(format!("expected {n} columns in every row")));
        }
        Self::new(DMatrix::from_fn(n, n, |i, j| rows[i][j]))
    }

    pub fn identity(n: usize) -> Self {
        assert!(n >= 1, "dimension must be positive");
        SymMatrix(DMatrix::identity(n, n))
    }

    pub fn zeros(n: usize) -> Self {
        assert!(n >= 1, "dimension must be positive");
        SymMatrix(DMatrix::zeros(n, n))
    }

    pub fn from_diagonal(diag: &[f64]) -> Self {
        assert!(!diag.is_empty(), "dimension must be positive");
        SymMatrix(DMatrix::from_diagonal(&DVector::from_column_slice(diag)))
    }

    /// `Σ w_i v_i v_iᵀ`.
    pub fn gram<'a>(dim: usize, terms: impl IntoIterator<Item = (f64, &'a DVector<f64>)>) -> Self {
        let mut acc = DMatrix::zeros(dim, dim);
        for (w, v) in terms {
            if w != 0.0 {
                acc.ger(w, v, v, 1.0);
            }
        }
        Self::symmetrized(acc)
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn as_matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn into_inner(self) -> DMatrix<f64> {
        self.0
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.0[(i, j)]
    }

    pub fn scaled(&self, c: f64) -> Self {
        SymMatrix(&self.0 * c)
    }

    pub fn sum(&self, other: &SymMatrix) -> Result<Self> {
        if self.dim() != other.dim() {
            return Err(Error::Dimension(format!(
                "cannot add {0}x{0} and {1}x{1} matrices",
                self.dim(),
                other.dim()
            )));
        }
        Ok(SymMatrix(&self.0 + &other.0))
    }

    /// Congruence `A · self · Aᵀ`.
    pub fn congruence(&self, a: &DMatrix<f64>) -> Self {
        Self::symmetrized(a * &self.0 * a.transpose())
    }

    pub fn trace(&self) -> f64 {
        self.0.trace()
    }

    pub fn max_diagonal(&self) -> f64 {
        self.0.diagonal().max()
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        self.0.row_iter().map(|r| r.iter().copied().collect()).collect()
    }
}

/// Lower triangular Cholesky factor `L` with positive diagonal.
#[derive(Clone, Debug, PartialEq)]
pub struct LowerTriangular(DMatrix<f64>);

impl LowerTriangular {
    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    /// Solves `L x = b` column by column.
    pub fn solve(&self, b: &DMatrix<f64>) -> DMatrix<f64> {
        self.0
            .solve_lower_triangular(b)
            .expect("Cholesky factor has a positive diagonal")
    }

    pub fn solve_vector(&self, b: &DVector<f64>) -> DVector<f64> {
        self.0
            .solve_lower_triangular(b)
            .expect("Cholesky factor has a positive diagonal")
    }

    /// `L Lᵀ`.
    pub fn reconstruct(&self) -> SymMatrix {
        SymMatrix::symmetrized(&self.0 * self.0.transpose())
    }

    /// `L⁻¹ S L⁻ᵀ` without forming `L⁻¹`.
    pub fn whiten(&self, s: &SymMatrix) -> SymMatrix {
        let x = self.solve(s.as_matrix());
        let y = self.solve(&x.transpose());
        SymMatrix::symmetrized(y)
    }
}

/// Relative pivot tolerance (`√ε`) used when a criterion decides whether
/// an information matrix is singular.
pub const CRITERION_PIVOT_TOL: f64 = 1.490_116_119_384_765_6e-8;

/// Cholesky factorization `m = L Lᵀ`.
///
/// A pivot at or below `dim · ε · max_diag(m)` reports [`Error::Singular`].
pub fn cholesky(m: &SymMatrix) -> Result<LowerTriangular> {
    cholesky_relative(m, 0.0)
}

/// Cholesky factorization that additionally rejects pivot `j` when it is at
/// or below `rel_tol · m[j][j]`.
pub fn cholesky_relative(m: &SymMatrix, rel_tol: f64) -> Result<LowerTriangular> {
    let n = m.dim();
    let a = m.as_matrix();
    let max_diag = m.max_diagonal();
    let floor = n as f64 * f64::EPSILON * max_diag.max(0.0);
    let mut l = DMatrix::<f64>::zeros(n, n);
    for j in 0..n {
        let mut pivot = a[(j, j)];
        for k in 0..j {
            pivot -= l[(j, k)] * l[(j, k)];
        }
        let threshold = floor.max(rel_tol * a[(j, j)]);
        if !(pivot > threshold) {
            return Err(Error::Singular {
                index: j,
                pivot,
                threshold,
            });
        }
        let diag = pivot.sqrt();
        l[(j, j)] = diag;
        for i in (j + 1)..n {
            let mut v = a[(i, j)];
            for k in 0..j {
                v -= l[(i, k)] * l[(j, k)];
            }
            l[(i, j)] = v / diag;
        }
    }
    Ok(LowerTriangular(l))
}

/// Eigendecomposition of a symmetric matrix with eigenvalues in descending order.
#[derive(Clone, Debug)]
pub struct SymEigen {
    pub values: Vec<f64>,
    /// Orthonormal eigenvectors, column `k` pairs with `values[k]`.
    pub vectors: DMatrix<f64>,
}

impl SymEigen {
    /// Number of eigenvalues at or above `dim · ε · λ_max`.
    pub fn numerical_rank(&self) -> usize {
        let threshold = rank_threshold(&self.values);
        self.values.iter().filter(|&&v| v > 0.0 && v >= threshold).count()
    }

    pub fn vector(&self, k: usize) -> DVector<f64> {
        self.vectors.column(k).into_owned()
    }
}

fn rank_threshold(values: &[f64]) -> f64 {
    let lmax = values.iter().copied().fold(0.0_f64, f64::max);
    values.len() as f64 * f64::EPSILON * lmax
}

pub fn sym_eig(m: &SymMatrix) -> Result<SymEigen> {
    let eig = SymmetricEigen::try_new(m.as_matrix().clone(), f64::EPSILON, 10_000)
        .ok_or(Error::Convergence)?;
    let n = m.dim();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let values = order.iter().map(|&k| eig.eigenvalues[k]).collect();
    let mut vectors = DMatrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        vectors.set_column(dst, &eig.eigenvectors.column(src));
    }
    Ok(SymEigen { values, vectors })
}

/// Numerical rank of a symmetric matrix.
pub fn numerical_rank(m: &SymMatrix) -> Result<usize> {
    Ok(sym_eig(m)?.numerical_rank())
}

/// `tr(m⁻¹ h)` through the Cholesky factor of `m`.
///
/// Fails with [`Error::Singular`] when `m` is not numerically positive
/// definite, judged by [`cholesky_relative`] with [`CRITERION_PIVOT_TOL`];
/// criterion evaluators map that to an infinite value.
pub fn trace_of_inverse_product(m: &SymMatrix, h: &SymMatrix) -> Result<f64> {
    if m.dim() != h.dim() {
        return Err(Error::Dimension(format!(
            "trace form of {0}x{0} and {1}x{1} matrices",
            m.dim(),
            h.dim()
        )));
    }
    let l = cholesky_relative(m, CRITERION_PIVOT_TOL)?;
    Ok(l.whiten(h).trace())
}

/// Inverse of a positive definite matrix via Cholesky solves.
///
/// Only used to convert covariance data into information form.
pub fn spd_inverse(m: &SymMatrix) -> Result<SymMatrix> {
    let l = cholesky(m)?;
    Ok(l.whiten(&SymMatrix::identity(m.dim())))
}
