//! Vectorization, Kronecker and duplication-matrix algebra.
//!
//! Conventions:
//! - `vec` stacks columns, so element `(i, j)` of an `r x c` matrix lands at
//!   position `j * r + i`. This is nalgebra's native storage order.
//! - `vech` stacks the on-and-below-diagonal entries column by column, so a
//!   2x2 symmetric `[[a, b], [b, c]]` becomes `[a, b, c]`.
//! - The duplication matrix `D` satisfies `vec(A) = D vech(A)` for symmetric
//!   `A`, and `D+ = (D^T D)^-1 D^T` recovers `vech(A) = D+ vec(A)`.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Dense real matrix in column-major order.
pub type DenseMatrix = DMatrix<f64>;

/// Relative tolerance used when accepting a dense matrix as symmetric.
pub const SYMMETRY_TOL: f64 = 1e-12;

/// Number of unique entries of an `n x n` symmetric matrix.
pub fn half_len(n: usize) -> usize {
    n * (n + 1) / 2
}

/// Position of entry `(i, j)` (with `i >= j`) in the `vech` ordering.
pub fn vech_index(n: usize, i: usize, j: usize) -> usize {
    let (i, j) = if i >= j { (i, j) } else { (j, i) };
    // columns 0..j hold n + (n - 1) + ... + (n - j + 1) entries
    j * (2 * n - j + 1) / 2 + (i - j)
}

/// Symmetric `n x n` matrix stored by its `vech` half-vector.
///
/// Expansion writes the same stored scalar to `(i, j)` and `(j, i)`, so the
/// dense form is bit-for-bit equal to its transpose.
#[derive(Debug, Clone, PartialEq)]
pub struct SymmetricMatrix {
    dim: usize,
    half: Vec<f64>,
}

impl SymmetricMatrix {
    pub fn from_half(half: Vec<f64>, dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::Domain("symmetric matrix dimension must be positive".into()));
        }
        if half.len() != half_len(dim) {
            return Err(Error::Dimension(format!(
                "half-vector of length {} does not match dimension {} (expected {})",
                half.len(),
                dim,
                half_len(dim)
            )));
        }
        Ok(Self { dim, half })
    }

    /// Accepts `m` if it is square and symmetric within [`SYMMETRY_TOL`]
    /// relative to `max(1, max|m|)`. The lower triangle is kept.
    pub fn from_dense(m: &DenseMatrix) -> Result<Self> {
        check_symmetric(m)?;
        Ok(Self::from_lower(m))
    }

    /// Builds from the lower triangle of `m` without checking symmetry.
    pub fn from_lower(m: &DenseMatrix) -> Self {
        let n = m.nrows();
        let mut half = Vec::with_capacity(half_len(n));
        for j in 0..n {
            for i in j..n {
                half.push(m[(i, j)]);
            }
        }
        Self { dim: n, half }
    }

    /// Symmetric part `(m + m^T) / 2` of a square matrix.
    pub fn symmetrize(m: &DenseMatrix) -> Result<Self> {
        if !m.is_square() {
            return Err(Error::Dimension(format!(
                "cannot symmetrize a {}x{} matrix",
                m.nrows(),
                m.ncols()
            )));
        }
        let n = m.nrows();
        let mut half = Vec::with_capacity(half_len(n));
        for j in 0..n {
            for i in j..n {
                half.push(0.5 * (m[(i, j)] + m[(j, i)]));
            }
        }
        Ok(Self { dim: n, half })
    }

    pub fn identity(dim: usize) -> Self {
        Self::from_lower(&DenseMatrix::identity(dim, dim))
    }

    pub fn zeros(dim: usize) -> Self {
        Self { dim, half: vec![0.0; half_len(dim)] }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn half(&self) -> &[f64] {
        &self.half
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.half[vech_index(self.dim, i, j)]
    }

    pub fn to_dense(&self) -> DenseMatrix {
        let n = self.dim;
        let mut m = DenseMatrix::zeros(n, n);
        let mut k = 0;
        for j in 0..n {
            for i in j..n {
                m[(i, j)] = self.half[k];
                m[(j, i)] = self.half[k];
                k += 1;
            }
        }
        m
    }

    pub fn vech(&self) -> DVector<f64> {
        DVector::from_column_slice(&self.half)
    }
}

fn check_symmetric(m: &DenseMatrix) -> Result<()> {
    if !m.is_square() {
        return Err(Error::Contract(format!(
            "expected a square matrix, got {}x{}",
            m.nrows(),
            m.ncols()
        )));
    }
    let scale = m.amax().max(1.0);
    let asym = (m - m.transpose()).amax();
    if asym > SYMMETRY_TOL * scale {
        return Err(Error::Contract(format!(
            "matrix is not symmetric (max |A - A^T| = {asym:e})"
        )));
    }
    Ok(())
}

/// Column-stacking vectorization.
pub fn vec(m: &DenseMatrix) -> DVector<f64> {
    DVector::from_column_slice(m.as_slice())
}

/// Inverse of [`vec`].
pub fn mat(v: &DVector<f64>, rows: usize, cols: usize) -> Result<DenseMatrix> {
    if v.len() != rows * cols {
        return Err(Error::Dimension(format!(
            "cannot reshape a vector of length {} into {}x{}",
            v.len(),
            rows,
            cols
        )));
    }
    Ok(DenseMatrix::from_column_slice(rows, cols, v.as_slice()))
}

pub fn kron(a: &DenseMatrix, b: &DenseMatrix) -> DenseMatrix {
    a.kronecker(b)
}

/// Half-vectorization of a dense matrix that must be symmetric.
pub fn vech(m: &DenseMatrix) -> Result<DVector<f64>> {
    Ok(SymmetricMatrix::from_dense(m)?.vech())
}

/// Rebuilds the full symmetric matrix from a half-vector.
pub fn matf(h: &DVector<f64>, dim: usize) -> Result<SymmetricMatrix> {
    SymmetricMatrix::from_half(h.as_slice().to_vec(), dim)
}

/// `sym(A) = A + A^T - A o I`.
pub fn sym(m: &DenseMatrix) -> Result<DenseMatrix> {
    if !m.is_square() {
        return Err(Error::Dimension(format!(
            "sym requires a square matrix, got {}x{}",
            m.nrows(),
            m.ncols()
        )));
    }
    let mut out = m + m.transpose();
    for i in 0..m.nrows() {
        out[(i, i)] -= m[(i, i)];
    }
    Ok(out)
}

/// Duplication matrix and its Moore-Penrose pseudoinverse for one dimension.
#[derive(Debug, Clone, PartialEq)]
pub struct DuplicationPair {
    pub dim: usize,
    pub dup: DenseMatrix,
    pub pinv: DenseMatrix,
}

/// Builds `D` and `D+` by index bookkeeping. `D^T D` is diagonal with 1 on
/// diagonal-entry columns and 2 on off-diagonal columns, so `D+` is `D^T`
/// with the off-diagonal rows halved.
pub fn duplication(dim: usize) -> Result<DuplicationPair> {
    if dim < 1 {
        return Err(Error::Domain("duplication matrix needs dim >= 1".into()));
    }
    let n = dim;
    let mut dup = DenseMatrix::zeros(n * n, half_len(n));
    let mut pinv = DenseMatrix::zeros(half_len(n), n * n);
    for j in 0..n {
        for i in 0..n {
            let k = vech_index(n, i, j);
            dup[(j * n + i, k)] = 1.0;
            pinv[(k, j * n + i)] = if i == j { 1.0 } else { 0.5 };
        }
    }
    Ok(DuplicationPair { dim, dup, pinv })
}

impl DuplicationPair {
    /// `D^T vec(G)`: the symmetry-aware gradient with respect to `vech(X)`
    /// when `G` is the unconstrained gradient with respect to `X`.
    pub fn reduce_gradient(&self, g: &DenseMatrix) -> DVector<f64> {
        self.dup.transpose() * vec(g)
    }
}
