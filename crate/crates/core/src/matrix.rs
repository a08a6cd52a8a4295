//! Dense symmetric matrices and the spectral primitives built on them.
//!
//! [`SymMatrix`] keeps its storage exactly symmetric: every constructor either
//! validates and averages with the transpose or builds the matrix from a
//! symmetric expression. Spectral routines work through [`sym_eigen`], which
//! returns eigenvalues in ascending order.

use std::ops::{Add, Mul, Neg, Sub};

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{invalid, Error, Result};

/// Negative eigenvalues down to `-PSD_ROUNDOFF * max(1, |λ|max)` are treated as
/// round-off and clamped to zero.
pub const PSD_ROUNDOFF: f64 = 1e-10;

/// A matrix counts as singular when `λmin <= SINGULAR_RTOL * max(1, λmax)`.
pub const SINGULAR_RTOL: f64 = 1e-12;

/// Dense symmetric `d x d` matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct SymMatrix(DMatrix<f64>);

impl SymMatrix {
    pub fn zeros(dim: usize) -> Self {
        SymMatrix(DMatrix::zeros(dim, dim))
    }

    pub fn identity(dim: usize) -> Self {
        SymMatrix(DMatrix::identity(dim, dim))
    }

    pub fn from_diagonal(diag: &[f64]) -> Self {
        SymMatrix(DMatrix::from_diagonal(&DVector::from_column_slice(diag)))
    }

    /// Builds a matrix from row-major entries, rejecting input that is not
    /// symmetric up to round-off.
    pub fn from_row_slice(dim: usize, entries: &[f64]) -> Result<Self> {
        if entries.len() != dim * dim {
            return Err(Error::DimensionMismatch {
                expected: dim * dim,
                got: entries.len(),
            });
        }
        Self::from_matrix(DMatrix::from_row_slice(dim, dim, entries))
    }

    /// Validates a square, finite, (nearly) symmetric matrix and stores its
    /// symmetric part.
    pub fn from_matrix(m: DMatrix<f64>) -> Result<Self> {
        if m.nrows() != m.ncols() {
            return Err(invalid(format!(
                "matrix is {}x{}, expected square",
                m.nrows(),
                m.ncols()
            )));
        }
        if m.nrows() == 0 {
            return Err(invalid("matrix dimension must be at least 1"));
        }
        if m.iter().any(|v| !v.is_finite()) {
            return Err(invalid("matrix has non-finite entries"));
        }
        let scale = m.amax().max(1.0);
        let asym = (&m - m.transpose()).amax();
        if asym > 1e-9 * scale {
            return Err(invalid(format!("matrix is not symmetric (max |A - Aᵀ| = {asym:e})")));
        }
        Ok(Self::symmetrize(m))
    }

    /// Symmetric part `(M + Mᵀ)/2` of an arbitrary square matrix.
    pub fn symmetrize(m: DMatrix<f64>) -> Self {
        let t = m.transpose();
        SymMatrix((m + t) * 0.5)
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn as_matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.0
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.0[(i, j)]
    }

    pub fn trace(&self) -> f64 {
        self.0.trace()
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.0.norm()
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|v| v.is_finite())
    }

    /// Row-major copy of the entries.
    pub fn to_row_major(&self) -> Vec<f64> {
        let d = self.dim();
        (0..d)
            .flat_map(|i| (0..d).map(move |j| (i, j)))
            .map(|(i, j)| self.0[(i, j)])
            .collect()
    }

    /// `tr(self · weight · other)`, the Bures-Wasserstein metric at `weight`.
    pub fn weighted_inner(&self, other: &SymMatrix, weight: &SymMatrix) -> f64 {
        (&self.0 * &weight.0).component_mul(&other.0).sum()
    }

    /// Congruence `A · self · A` for a symmetric `A`, symmetrized.
    pub fn congruence(&self, a: &SymMatrix) -> SymMatrix {
        SymMatrix::symmetrize(&a.0 * &self.0 * &a.0)
    }

    pub fn scale(&self, factor: f64) -> SymMatrix {
        SymMatrix(&self.0 * factor)
    }
}

impl Add for &SymMatrix {
    type Output = SymMatrix;
    fn add(self, rhs: &SymMatrix) -> SymMatrix {
        SymMatrix(&self.0 + &rhs.0)
    }
}

impl Sub for &SymMatrix {
    type Output = SymMatrix;
    fn sub(self, rhs: &SymMatrix) -> SymMatrix {
        SymMatrix(&self.0 - &rhs.0)
    }
}

impl Mul<f64> for &SymMatrix {
    type Output = SymMatrix;
    fn mul(self, rhs: f64) -> SymMatrix {
        self.scale(rhs)
    }
}

impl Neg for &SymMatrix {
    type Output = SymMatrix;
    fn neg(self) -> SymMatrix {
        SymMatrix(-&self.0)
    }
}

/// `S = Q diag(λ) Qᵀ` with `λ` ascending.
#[derive(Clone, Debug)]
pub struct EigenDecomposition {
    pub eigenvalues: DVector<f64>,
    pub eigenvectors: DMatrix<f64>,
}

impl EigenDecomposition {
    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn min(&self) -> f64 {
        self.eigenvalues[0]
    }

    pub fn max(&self) -> f64 {
        self.eigenvalues[self.dim() - 1]
    }

    /// `Q diag(f(λ)) Qᵀ`.
    pub fn map(&self, f: impl Fn(f64) -> f64) -> SymMatrix {
        let mut scaled = self.eigenvectors.clone();
        for (k, mut col) in scaled.column_iter_mut().enumerate() {
            col *= f(self.eigenvalues[k]);
        }
        SymMatrix::symmetrize(scaled * self.eigenvectors.transpose())
    }

    pub fn reconstruct(&self) -> SymMatrix {
        self.map(|l| l)
    }

    fn scale(&self) -> f64 {
        self.eigenvalues.amax().max(1.0)
    }

    pub(crate) fn is_singular(&self) -> bool {
        self.min() <= SINGULAR_RTOL * self.max().max(1.0)
    }

    pub(crate) fn check_psd(&self) -> Result<()> {
        if self.min() < -PSD_ROUNDOFF * self.scale() {
            return Err(Error::NotPsd { min_eig: self.min() });
        }
        Ok(())
    }

    pub(crate) fn check_spd(&self) -> Result<()> {
        if self.is_singular() {
            return Err(Error::NotSpd { min_eig: self.min() });
        }
        Ok(())
    }
}

/// Eigendecomposition of a symmetric matrix, eigenvalues ascending.
pub fn sym_eigen(s: &SymMatrix) -> Result<EigenDecomposition> {
    if !s.is_finite() {
        return Err(invalid("matrix has non-finite entries"));
    }
    let eig = SymmetricEigen::try_new(s.0.clone(), f64::EPSILON, 0)
        .ok_or_else(|| invalid("symmetric eigensolver failed"))?;
    let d = s.dim();
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let eigenvalues = DVector::from_iterator(d, order.iter().map(|&k| eig.eigenvalues[k]));
    let mut eigenvectors = DMatrix::zeros(d, d);
    for (dst, &src) in order.iter().enumerate() {
        eigenvectors.set_column(dst, &eig.eigenvectors.column(src));
    }
    Ok(EigenDecomposition {
        eigenvalues,
        eigenvectors,
    })
}

/// Eigendecomposition that additionally requires positive definiteness.
pub(crate) fn spd_eigen(s: &SymMatrix) -> Result<EigenDecomposition> {
    let eig = sym_eigen(s)?;
    eig.check_spd()?;
    Ok(eig)
}

/// Principal square root of a positive semi-definite matrix.
pub fn sym_sqrt(s: &SymMatrix) -> Result<SymMatrix> {
    let eig = sym_eigen(s)?;
    eig.check_psd()?;
    Ok(eig.map(|l| l.max(0.0).sqrt()))
}

/// Floors every eigenvalue at `eps`: `Q diag(max(λ, eps)) Qᵀ`.
pub fn clip_min_eig(s: &SymMatrix, eps: f64) -> Result<SymMatrix> {
    if !(eps > 0.0) || !eps.is_finite() {
        return Err(invalid(format!("clipping threshold must be positive, got {eps}")));
    }
    let eig = sym_eigen(s)?;
    if eig.min() >= eps {
        return Ok(s.clone());
    }
    Ok(eig.map(|l| l.max(eps)))
}
