//! The linearized Bures-Wasserstein (LBW) space.
//!
//! A Gaussian `N(m, Σ)` is represented by the pair `(m, T)` where `T` is the
//! BW logarithm of `Σ` at a fixed reference covariance `Σ⁰`. The pair lives in
//! the flat space `ℝ^d × Sym_d` with inner product `⟨m¹,m²⟩ + tr(T¹ Σ⁰ T²)`,
//! and `Σ` is recovered with the extended exponential `(I+T) Σ⁰ (I+T)`, which
//! is defined for every symmetric `T`.
//!
//! Coordinates of `Sym_d` are taken with respect to an orthonormal basis of
//! `⟨·,·⟩_{Σ⁰}` built in the eigenframe `Σ⁰ = Q Λ Qᵀ`:
//!
//! * slot `(i, i)`: `Q eᵢeᵢᵀ Qᵀ / √λᵢ`
//! * slot `(i, j)`, `i < j`: `Q (eᵢeⱼᵀ + eⱼeᵢᵀ) Qᵀ / √(λᵢ + λⱼ)`
//!
//! Slots are ordered diagonal first (`i` ascending), then off-diagonal pairs in
//! lexicographic order. In the rotated frame `T̂ = Qᵀ T Q` every coordinate is a
//! single entry times a scale, `c = s · T̂ᵢⱼ` with `s = √λᵢ` on the diagonal and
//! `s = √(λᵢ + λⱼ)` off it.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::bw::{bw_exp, bw_log, check_weights, GaussianMeasure};
use crate::error::{invalid, Error, Result};
use crate::matrix::{clip_min_eig, spd_eigen, sym_eigen, EigenDecomposition, SymMatrix};

/// Covariance images with a smaller minimum eigenvalue are clipped before rebasing.
pub const REBASE_SINGULAR_EIG: f64 = 1e-10;
/// Eigenvalue floor applied to singular images during a rebase.
pub const REBASE_CLIP: f64 = 1e-8;

/// Reference covariance `Σ⁰` with its orthonormal basis of `Sym_d`.
#[derive(Clone, Debug)]
pub struct LbwBase {
    sigma0: SymMatrix,
    eig: EigenDecomposition,
    slots: Vec<(usize, usize)>,
    scales: Vec<f64>,
    basis: Vec<SymMatrix>,
}

/// Number of independent entries of a symmetric `d x d` matrix.
pub fn sym_dim(d: usize) -> usize {
    d * (d + 1) / 2
}

impl LbwBase {
    /// Builds the orthonormal basis for `⟨·,·⟩_{Σ⁰}` and verifies its Gram
    /// matrix to `1e-10`.
    pub fn new(sigma0: SymMatrix) -> Result<Self> {
        let eig = spd_eigen(&sigma0)?;
        let d = sigma0.dim();
        let lambda = &eig.eigenvalues;
        let mut slots = Vec::with_capacity(sym_dim(d));
        let mut scales = Vec::with_capacity(sym_dim(d));
        for i in 0..d {
            slots.push((i, i));
            scales.push(lambda[i].sqrt());
        }
        for i in 0..d {
            for j in (i + 1)..d {
                slots.push((i, j));
                scales.push((lambda[i] + lambda[j]).sqrt());
            }
        }
        let q = &eig.eigenvectors;
        let basis = slots
            .iter()
            .zip(&scales)
            .map(|(&(i, j), &s)| {
                let qi = q.column(i);
                let qj = q.column(j);
                let m: DMatrix<f64> = if i == j {
                    qi * qi.transpose() / s
                } else {
                    (qi * qj.transpose() + qj * qi.transpose()) / s
                };
                SymMatrix::symmetrize(m)
            })
            .collect();
        let base = LbwBase {
            sigma0,
            eig,
            slots,
            scales,
            basis,
        };
        let dev = base.gram_deviation();
        if dev > 1e-10 {
            return Err(invalid(format!(
                "reference covariance too ill-conditioned: basis Gram deviation {dev:e}"
            )));
        }
        Ok(base)
    }

    pub fn identity(dim: usize) -> Self {
        Self::new(SymMatrix::identity(dim)).expect("identity is SPD")
    }

    pub fn dim(&self) -> usize {
        self.sigma0.dim()
    }

    /// Number of coordinates of the matrix part, `d(d+1)/2`.
    pub fn coord_dim(&self) -> usize {
        self.slots.len()
    }

    pub fn sigma0(&self) -> &SymMatrix {
        &self.sigma0
    }

    pub fn eigen(&self) -> &EigenDecomposition {
        &self.eig
    }

    pub fn basis(&self) -> &[SymMatrix] {
        &self.basis
    }

    /// Gram matrix `tr(e_k Σ⁰ e_ℓ)` of the basis.
    pub fn gram(&self) -> DMatrix<f64> {
        let n = self.basis.len();
        DMatrix::from_fn(n, n, |k, l| {
            self.basis[k].weighted_inner(&self.basis[l], &self.sigma0)
        })
    }

    /// Largest entry of `|Gram − I|`.
    pub fn gram_deviation(&self) -> f64 {
        let n = self.basis.len();
        (self.gram() - DMatrix::identity(n, n)).amax()
    }

    /// `⟨T, S⟩_{Σ⁰} = tr(T Σ⁰ S)`.
    pub fn inner_sym(&self, a: &SymMatrix, b: &SymMatrix) -> f64 {
        a.weighted_inner(b, &self.sigma0)
    }

    /// Coefficients `⟨T, e_ℓ⟩_{Σ⁰}` of `T` in the basis.
    pub fn coords(&self, t: &SymMatrix) -> DVector<f64> {
        let q = &self.eig.eigenvectors;
        let rotated = q.transpose() * t.as_matrix() * q;
        DVector::from_iterator(
            self.slots.len(),
            self.slots
                .iter()
                .zip(&self.scales)
                .map(|(&(i, j), &s)| s * 0.5 * (rotated[(i, j)] + rotated[(j, i)])),
        )
    }

    /// Inverse of [`LbwBase::coords`]: `Σ_ℓ c_ℓ e_ℓ`.
    pub fn from_coords(&self, c: &DVector<f64>) -> SymMatrix {
        assert_eq!(c.len(), self.slots.len(), "coordinate vector has wrong length");
        let d = self.dim();
        let mut rotated = DMatrix::zeros(d, d);
        for ((&(i, j), &s), &v) in self.slots.iter().zip(&self.scales).zip(c.iter()) {
            rotated[(i, j)] = v / s;
            rotated[(j, i)] = v / s;
        }
        let q = &self.eig.eigenvectors;
        SymMatrix::symmetrize(q * rotated * q.transpose())
    }

    /// Draws a matrix whose basis coordinates are i.i.d. standard normal.
    pub fn sample_std_coords<R: Rng + ?Sized>(&self, rng: &mut R) -> DVector<f64> {
        DVector::from_iterator(
            self.slots.len(),
            (0..self.slots.len()).map(|_| rng.sample::<f64, _>(StandardNormal)),
        )
    }
}

/// Point `(m, T)` of the LBW space. `T` is unconstrained.
#[derive(Clone, Debug, PartialEq)]
pub struct LbwPoint {
    pub m: DVector<f64>,
    pub t: SymMatrix,
}

impl LbwPoint {
    pub fn new(m: DVector<f64>, t: SymMatrix) -> Result<Self> {
        if m.len() != t.dim() {
            return Err(Error::DimensionMismatch {
                expected: t.dim(),
                got: m.len(),
            });
        }
        Ok(LbwPoint { m, t })
    }

    pub fn zero(dim: usize) -> Self {
        LbwPoint {
            m: DVector::zeros(dim),
            t: SymMatrix::zeros(dim),
        }
    }

    pub fn dim(&self) -> usize {
        self.m.len()
    }

    pub fn is_finite(&self) -> bool {
        self.m.iter().all(|v| v.is_finite()) && self.t.is_finite()
    }

    pub fn sub(&self, other: &LbwPoint) -> LbwPoint {
        LbwPoint {
            m: &self.m - &other.m,
            t: &self.t - &other.t,
        }
    }

    pub fn add(&self, other: &LbwPoint) -> LbwPoint {
        LbwPoint {
            m: &self.m + &other.m,
            t: &self.t + &other.t,
        }
    }

    pub fn scale(&self, factor: f64) -> LbwPoint {
        LbwPoint {
            m: &self.m * factor,
            t: self.t.scale(factor),
        }
    }
}

fn check_point(p: &LbwPoint, base: &LbwBase) -> Result<()> {
    if p.dim() != base.dim() || p.t.dim() != base.dim() {
        return Err(Error::DimensionMismatch {
            expected: base.dim(),
            got: p.dim(),
        });
    }
    Ok(())
}

/// `⟨a.m, b.m⟩ + tr(a.T Σ⁰ b.T)`.
pub fn lbw_inner(a: &LbwPoint, b: &LbwPoint, base: &LbwBase) -> Result<f64> {
    check_point(a, base)?;
    check_point(b, base)?;
    Ok(a.m.dot(&b.m) + base.inner_sym(&a.t, &b.t))
}

pub fn lbw_norm(p: &LbwPoint, base: &LbwBase) -> Result<f64> {
    Ok(lbw_inner(p, p, base)?.max(0.0).sqrt())
}

/// Component-wise product of two matrices in basis coordinates.
pub fn hadamard(a: &SymMatrix, b: &SymMatrix, base: &LbwBase) -> SymMatrix {
    let prod = base.coords(a).component_mul(&base.coords(b));
    base.from_coords(&prod)
}

/// Standard normal element of `Sym_d` with respect to `⟨·,·⟩_{Σ⁰}`.
pub fn sample_std_sym<R: Rng + ?Sized>(base: &LbwBase, rng: &mut R) -> SymMatrix {
    base.from_coords(&base.sample_std_coords(rng))
}

/// Symmetric matrix with i.i.d. `N(0, 1)` upper triangle (diagonal included)
/// mirrored below the diagonal.
pub fn sample_sym_upper<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> SymMatrix {
    let mut m = DMatrix::zeros(dim, dim);
    for i in 0..dim {
        for j in i..dim {
            let v: f64 = rng.sample(StandardNormal);
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
    SymMatrix::symmetrize(m)
}

/// Image `N(m, (I+T) Σ⁰ (I+T))` of an LBW point.
pub fn to_gaussian(p: &LbwPoint, base: &LbwBase) -> Result<GaussianMeasure> {
    check_point(p, base)?;
    Ok(GaussianMeasure {
        mean: p.m.clone(),
        cov: bw_exp(base.sigma0(), &p.t)?,
    })
}

/// LBW coordinates `(m, log_{Σ⁰} Σ)` of a non-singular Gaussian.
pub fn from_gaussian(g: &GaussianMeasure, base: &LbwBase) -> Result<LbwPoint> {
    if g.dim() != base.dim() {
        return Err(Error::DimensionMismatch {
            expected: base.dim(),
            got: g.dim(),
        });
    }
    Ok(LbwPoint {
        m: g.mean.clone(),
        t: bw_log(base.sigma0(), &g.cov)?,
    })
}

/// Linearized optimal transport distance with reference `N(0, Σ⁰)`.
pub fn lot_distance(a: &GaussianMeasure, b: &GaussianMeasure, base: &LbwBase) -> Result<f64> {
    let pa = from_gaussian(a, base)?;
    let pb = from_gaussian(b, base)?;
    lbw_norm(&pa.sub(&pb), base)
}

/// Weighted arithmetic mean of LBW points.
pub fn lbw_barycenter(points: &[LbwPoint], weights: &[f64]) -> Result<LbwPoint> {
    check_weights(weights, points.len())?;
    let d = points[0].dim();
    let mut m = DVector::zeros(d);
    let mut t = DMatrix::zeros(d, d);
    for (p, &w) in points.iter().zip(weights) {
        if p.dim() != d {
            return Err(Error::DimensionMismatch { expected: d, got: p.dim() });
        }
        m += &p.m * w;
        t += p.t.as_matrix() * w;
    }
    Ok(LbwPoint {
        m,
        t: SymMatrix::symmetrize(t),
    })
}

/// Straight line `(1-τ) a + τ b` in LBW coordinates.
pub fn lbw_geodesic(a: &LbwPoint, b: &LbwPoint, tau: f64) -> Result<LbwPoint> {
    if !(0.0..=1.0).contains(&tau) {
        return Err(invalid(format!("geodesic parameter {tau} outside [0, 1]")));
    }
    if a.dim() != b.dim() {
        return Err(Error::DimensionMismatch {
            expected: a.dim(),
            got: b.dim(),
        });
    }
    Ok(a.scale(1.0 - tau).add(&b.scale(tau)))
}

/// Points re-expressed around a new reference covariance.
#[derive(Clone, Debug)]
pub struct Rebased {
    pub base: LbwBase,
    pub points: Vec<LbwPoint>,
    /// Particles whose covariance image was singular and had to be clipped.
    pub clipped: usize,
}

/// Moves every point to the LBW chart at `new_sigma0`, preserving its Gaussian
/// image. Singular images are first floored at [`REBASE_CLIP`].
pub fn rebase(points: &[LbwPoint], old: &LbwBase, new_sigma0: SymMatrix) -> Result<Rebased> {
    let base = LbwBase::new(new_sigma0)?;
    let mut clipped = 0;
    let mut moved = Vec::with_capacity(points.len());
    for p in points {
        let mut cov = to_gaussian(p, old)?.cov;
        if sym_eigen(&cov)?.min() < REBASE_SINGULAR_EIG {
            cov = clip_min_eig(&cov, REBASE_CLIP)?;
            clipped += 1;
        }
        moved.push(LbwPoint {
            m: p.m.clone(),
            t: bw_log(base.sigma0(), &cov)?,
        });
    }
    Ok(Rebased {
        base,
        points: moved,
        clipped,
    })
}
