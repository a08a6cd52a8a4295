//! Bures-Wasserstein geometry of Gaussian measures: the closed-form
//! 2-Wasserstein distance, Riemannian exponential and logarithm at a base
//! covariance, geodesics and fixed-point barycenters.

use std::cmp::Ordering;

use nalgebra::{DMatrix, DVector};

use crate::error::{invalid, Error, Result};
use crate::matrix::{spd_eigen, sym_eigen, sym_sqrt, SymMatrix};

/// `N(mean, cov)` with a positive semi-definite (possibly singular) covariance.
#[derive(Clone, Debug, PartialEq)]
pub struct GaussianMeasure {
    pub mean: DVector<f64>,
    pub cov: SymMatrix,
}

impl GaussianMeasure {
    pub fn new(mean: DVector<f64>, cov: SymMatrix) -> Result<Self> {
        if mean.len() != cov.dim() {
            return Err(Error::DimensionMismatch {
                expected: cov.dim(),
                got: mean.len(),
            });
        }
        if mean.iter().any(|v| !v.is_finite()) {
            return Err(invalid("mean has non-finite entries"));
        }
        sym_eigen(&cov)?.check_psd()?;
        Ok(GaussianMeasure { mean, cov })
    }

    pub fn standard(dim: usize) -> Self {
        GaussianMeasure {
            mean: DVector::zeros(dim),
            cov: SymMatrix::identity(dim),
        }
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    /// `M₂(μ)² = |m|² + tr Σ`.
    pub fn second_moment(&self) -> f64 {
        self.mean.norm_squared() + self.cov.trace()
    }
}

fn canonical_order(a: &GaussianMeasure, b: &GaussianMeasure) -> Ordering {
    a.mean
        .iter()
        .zip(b.mean.iter())
        .map(|(x, y)| x.total_cmp(y))
        .chain(
            a.cov
                .as_matrix()
                .iter()
                .zip(b.cov.as_matrix().iter())
                .map(|(x, y)| x.total_cmp(y)),
        )
        .find(|o| o.is_ne())
        .unwrap_or(Ordering::Equal)
}

fn check_same_dim(a: usize, b: usize) -> Result<()> {
    if a != b {
        return Err(Error::DimensionMismatch { expected: a, got: b });
    }
    Ok(())
}

/// 2-Wasserstein distance between two Gaussians.
///
/// The arguments are put in a canonical order before evaluation so the result
/// is bitwise symmetric.
pub fn bw_distance(a: &GaussianMeasure, b: &GaussianMeasure) -> Result<f64> {
    check_same_dim(a.dim(), b.dim())?;
    let (a, b) = match canonical_order(a, b) {
        Ordering::Greater => (b, a),
        _ => (a, b),
    };
    let root_a = sym_sqrt(&a.cov)?;
    sym_eigen(&b.cov)?.check_psd()?;
    let cross = sym_sqrt(&b.cov.congruence(&root_a))?;
    let mean_part = (&a.mean - &b.mean).norm_squared();
    let sq = mean_part + a.cov.trace() + b.cov.trace() - 2.0 * cross.trace();
    Ok(sq.max(0.0).sqrt())
}

/// Extended exponential map `(I + T) Σ (I + T)`, defined for every symmetric `T`.
pub fn bw_exp(base: &SymMatrix, tangent: &SymMatrix) -> Result<SymMatrix> {
    check_same_dim(base.dim(), tangent.dim())?;
    if !base.is_finite() || !tangent.is_finite() {
        return Err(invalid("non-finite input to exponential map"));
    }
    let shifted = tangent + &SymMatrix::identity(base.dim());
    Ok(base.congruence(&shifted))
}

/// Logarithm `log_Σ(Σ̄)`: the optimal transport map from `N(0, Σ)` to
/// `N(0, Σ̄)` minus the identity.
pub fn bw_log(base: &SymMatrix, target: &SymMatrix) -> Result<SymMatrix> {
    check_same_dim(base.dim(), target.dim())?;
    let eig = spd_eigen(base)?;
    spd_eigen(target)?;
    let half = eig.map(f64::sqrt);
    let inv_half = eig.map(|l| 1.0 / l.sqrt());
    let middle = sym_sqrt(&target.congruence(&half))?;
    let map = middle.congruence(&inv_half);
    Ok(&map - &SymMatrix::identity(base.dim()))
}

/// Point at fraction `tau` along the BW geodesic from `a` to `b`.
pub fn bw_geodesic(a: &GaussianMeasure, b: &GaussianMeasure, tau: f64) -> Result<GaussianMeasure> {
    if !(0.0..=1.0).contains(&tau) {
        return Err(invalid(format!("geodesic parameter {tau} outside [0, 1]")));
    }
    check_same_dim(a.dim(), b.dim())?;
    if tau == 0.0 {
        return Ok(a.clone());
    }
    let dim = a.dim();
    let log = bw_log(&a.cov, &b.cov)?;
    // (1-τ)I + τ(I + log) = I + τ log
    let step = &SymMatrix::identity(dim) + &log.scale(tau);
    Ok(GaussianMeasure {
        mean: &a.mean * (1.0 - tau) + &b.mean * tau,
        cov: a.cov.congruence(&step),
    })
}

#[derive(Clone, Copy, Debug)]
pub struct BarycenterOptions {
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for BarycenterOptions {
    fn default() -> Self {
        BarycenterOptions {
            tol: 1e-10,
            max_iter: 500,
        }
    }
}

pub(crate) fn check_weights(weights: &[f64], count: usize) -> Result<()> {
    if weights.len() != count {
        return Err(Error::DimensionMismatch {
            expected: count,
            got: weights.len(),
        });
    }
    if count == 0 {
        return Err(invalid("empty point set"));
    }
    if weights.iter().any(|w| !(*w >= 0.0) || !w.is_finite()) {
        return Err(invalid("weights must be finite and non-negative"));
    }
    let total: f64 = weights.iter().sum();
    if (total - 1.0).abs() > 1e-9 {
        return Err(invalid(format!("weights sum to {total}, expected 1")));
    }
    Ok(())
}

/// `Σᵢ wᵢ (Σ̄^{1/2} Σᵢ Σ̄^{1/2})^{1/2}` together with `Σ̄^{1/2}` and its inverse.
fn barycenter_map(
    covs: &[&SymMatrix],
    weights: &[f64],
    current: &SymMatrix,
) -> Result<(SymMatrix, SymMatrix, SymMatrix)> {
    let eig = spd_eigen(current)?;
    let half = eig.map(f64::sqrt);
    let inv_half = eig.map(|l| 1.0 / l.sqrt());
    let dim = current.dim();
    let mut acc = DMatrix::zeros(dim, dim);
    for (cov, &w) in covs.iter().zip(weights) {
        if w == 0.0 {
            continue;
        }
        acc += sym_sqrt(&cov.congruence(&half))?.into_matrix() * w;
    }
    Ok((SymMatrix::symmetrize(acc), half, inv_half))
}

/// Relative fixed-point residual `‖Σ̄ − Σᵢ wᵢ (Σ̄^{1/2} Σᵢ Σ̄^{1/2})^{1/2}‖ / ‖Σ̄‖`
/// of a candidate barycenter covariance.
pub fn barycenter_residual(covs: &[&SymMatrix], weights: &[f64], candidate: &SymMatrix) -> Result<f64> {
    let (mapped, _, _) = barycenter_map(covs, weights, candidate)?;
    Ok((candidate - &mapped).frobenius_norm() / candidate.frobenius_norm())
}

/// Weighted Bures-Wasserstein barycenter.
///
/// The covariance is found with the fixed-point iteration
/// `Σ̄ ← Σ̄^{-1/2} (Σᵢ wᵢ (Σ̄^{1/2} Σᵢ Σ̄^{1/2})^{1/2})² Σ̄^{-1/2}`, started from
/// the weighted arithmetic mean of the covariances, and stops once the
/// relative residual of the barycenter equation drops below `opts.tol`.
pub fn bw_barycenter(
    points: &[GaussianMeasure],
    weights: &[f64],
    opts: BarycenterOptions,
) -> Result<GaussianMeasure> {
    check_weights(weights, points.len())?;
    let dim = points[0].dim();
    for p in points {
        check_same_dim(dim, p.dim())?;
        spd_eigen(&p.cov)?;
    }
    let mut mean = DVector::zeros(dim);
    let mut cov = DMatrix::zeros(dim, dim);
    for (p, &w) in points.iter().zip(weights) {
        mean += &p.mean * w;
        cov += p.cov.as_matrix() * w;
    }
    let covs: Vec<&SymMatrix> = points.iter().map(|p| &p.cov).collect();
    let mut current = SymMatrix::symmetrize(cov);
    let mut residual = f64::INFINITY;
    for _ in 0..opts.max_iter {
        let (mapped, _, inv_half) = barycenter_map(&covs, weights, &current)?;
        residual = (&current - &mapped).frobenius_norm() / current.frobenius_norm();
        if residual <= opts.tol {
            return Ok(GaussianMeasure { mean, cov: current });
        }
        let squared = SymMatrix::symmetrize(mapped.as_matrix() * mapped.as_matrix());
        current = squared.congruence(&inv_half);
    }
    Err(Error::NonConvergence {
        iterations: opts.max_iter,
        residual,
    })
}
