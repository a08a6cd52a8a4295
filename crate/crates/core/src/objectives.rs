//! Objective functionals on Gaussian measures.
//!
//! The main objective is `KL(μ | μ_targ) = 𝓤(μ) + 𝓥(μ)` for a Gaussian-mixture
//! target, where `𝓤` is the negative differential entropy and
//! `𝓥(μ) = E_μ[V]` with `V = −log μ_targ`. Expectations of `V` use a 2d+1
//! sigma-point rule that is exact for polynomials up to degree 3.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::bw::GaussianMeasure;
use crate::error::{invalid, Error, Result};
use crate::lbw::{to_gaussian, LbwBase, LbwPoint};
use crate::matrix::{clip_min_eig, sym_eigen, sym_sqrt, SymMatrix};

/// Value returned for particles whose covariance is singular.
pub const DEFAULT_SINGULAR_CAP: f64 = 1e4;

/// Gaussian mixture `Σ_k w_k N(m_k, Σ_k)`.
#[derive(Clone, Debug)]
pub struct TargetModel {
    weights: Vec<f64>,
    means: Vec<DVector<f64>>,
    covs: Vec<SymMatrix>,
    factors: Vec<Cholesky<f64, Dyn>>,
    precisions: Vec<DMatrix<f64>>,
    /// `log w_k − ½ log det(2π Σ_k)`
    log_norms: Vec<f64>,
}

impl TargetModel {
    pub fn new(weights: Vec<f64>, means: Vec<DVector<f64>>, covs: Vec<SymMatrix>) -> Result<Self> {
        let k = weights.len();
        if k == 0 {
            return Err(invalid("mixture needs at least one component"));
        }
        if means.len() != k || covs.len() != k {
            return Err(invalid(format!(
                "mixture has {k} weights, {} means and {} covariances",
                means.len(),
                covs.len()
            )));
        }
        if weights.iter().any(|w| !(*w > 0.0) || !w.is_finite()) {
            return Err(invalid("mixture weights must be positive"));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(invalid(format!("mixture weights sum to {total}, expected 1")));
        }
        let d = means[0].len();
        let mut factors = Vec::with_capacity(k);
        let mut precisions = Vec::with_capacity(k);
        let mut log_norms = Vec::with_capacity(k);
        for ((m, c), &w) in means.iter().zip(&covs).zip(&weights) {
            if m.len() != d || c.dim() != d {
                return Err(Error::DimensionMismatch {
                    expected: d,
                    got: if m.len() != d { m.len() } else { c.dim() },
                });
            }
            if m.iter().any(|v| !v.is_finite()) {
                return Err(invalid("mixture mean has non-finite entries"));
            }
            let eig = sym_eigen(c)?;
            eig.check_spd()?;
            let chol = Cholesky::new(c.as_matrix().clone()).ok_or(Error::NotSpd { min_eig: eig.min() })?;
            let log_det: f64 = eig.eigenvalues.iter().map(|l| l.ln()).sum();
            log_norms.push(w.ln() - 0.5 * (d as f64 * (2.0 * PI).ln() + log_det));
            precisions.push(chol.inverse());
            factors.push(chol);
        }
        Ok(TargetModel {
            weights,
            means,
            covs,
            factors,
            precisions,
            log_norms,
        })
    }

    pub fn single(mean: DVector<f64>, cov: SymMatrix) -> Result<Self> {
        Self::new(vec![1.0], vec![mean], vec![cov])
    }

    pub fn dim(&self) -> usize {
        self.means[0].len()
    }

    pub fn components(&self) -> usize {
        self.weights.len()
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn means(&self) -> &[DVector<f64>] {
        &self.means
    }

    pub fn covs(&self) -> &[SymMatrix] {
        &self.covs
    }

    fn component_logs(&self, x: &DVector<f64>) -> Vec<f64> {
        self.factors
            .iter()
            .zip(&self.means)
            .zip(&self.log_norms)
            .map(|((chol, m), ln)| {
                let mut y = x - m;
                chol.l_dirty().solve_lower_triangular_mut(&mut y);
                ln - 0.5 * y.norm_squared()
            })
            .collect()
    }

    /// `log μ_targ(x)` without input validation; non-finite input propagates.
    pub fn log_density(&self, x: &DVector<f64>) -> f64 {
        log_sum_exp(&self.component_logs(x))
    }

    /// Gradient and Hessian of `V = −log μ_targ` at `x`.
    ///
    /// With responsibilities `r_k`, component scores `a_k = −P_k (x − m_k)`
    /// and `g = Σ r_k a_k`: `∇V = −g`, `∇²V = Σ r_k (P_k − a_k a_kᵀ) + g gᵀ`.
    pub fn potential_derivatives(&self, x: &DVector<f64>) -> (DVector<f64>, DMatrix<f64>) {
        let logs = self.component_logs(x);
        let lse = log_sum_exp(&logs);
        let d = self.dim();
        let mut g = DVector::zeros(d);
        let mut hess = DMatrix::zeros(d, d);
        for ((l, p), m) in logs.iter().zip(&self.precisions).zip(&self.means) {
            let r = (l - lse).exp();
            if r == 0.0 {
                continue;
            }
            let a = -(p * (x - m));
            hess += (p - &a * a.transpose()) * r;
            g += a * r;
        }
        hess += &g * g.transpose();
        (-g, hess)
    }
}

fn log_sum_exp(values: &[f64]) -> f64 {
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return max;
    }
    max + values.iter().map(|v| (v - max).exp()).sum::<f64>().ln()
}

/// `log Σ_k w_k N(x; m_k, Σ_k)` evaluated with log-sum-exp.
pub fn gmm_logpdf(t: &TargetModel, x: &DVector<f64>) -> Result<f64> {
    if x.len() != t.dim() {
        return Err(Error::DimensionMismatch {
            expected: t.dim(),
            got: x.len(),
        });
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(invalid("evaluation point has non-finite entries"));
    }
    Ok(t.log_density(x))
}

/// Quadrature nodes and weights for expectations under a Gaussian.
#[derive(Clone, Debug)]
pub struct CubatureRule {
    pub nodes: Vec<DVector<f64>>,
    pub weights: Vec<f64>,
}

impl CubatureRule {
    pub fn expect(&self, f: impl Fn(&DVector<f64>) -> f64) -> f64 {
        self.nodes.iter().zip(&self.weights).map(|(x, w)| w * f(x)).sum()
    }
}

pub const DEFAULT_KAPPA: f64 = 1.0;

/// Sigma-point rule with `κ = 1`: centre `m` with weight `κ/(d+κ)` and nodes
/// `m ± √(d+κ) Lᵢ` with weight `1/(2(d+κ))`, where `Lᵢ` are the columns of
/// `cov^{1/2}`.
pub fn cubature(m: &DVector<f64>, cov: &SymMatrix) -> Result<CubatureRule> {
    cubature_with_kappa(m, cov, DEFAULT_KAPPA)
}

pub fn cubature_with_kappa(m: &DVector<f64>, cov: &SymMatrix, kappa: f64) -> Result<CubatureRule> {
    if m.len() != cov.dim() {
        return Err(Error::DimensionMismatch {
            expected: cov.dim(),
            got: m.len(),
        });
    }
    let d = m.len() as f64;
    if !(kappa >= 0.0) {
        return Err(invalid(format!("cubature κ must be non-negative, got {kappa}")));
    }
    let root = sym_sqrt(cov)?;
    let spread = (d + kappa).sqrt();
    let side = 1.0 / (2.0 * (d + kappa));
    let mut nodes = Vec::with_capacity(2 * m.len() + 1);
    let mut weights = Vec::with_capacity(2 * m.len() + 1);
    nodes.push(m.clone());
    weights.push(kappa / (d + kappa));
    for col in root.as_matrix().column_iter() {
        let offset = col * spread;
        nodes.push(m + &offset);
        weights.push(side);
        nodes.push(m - &offset);
        weights.push(side);
    }
    Ok(CubatureRule { nodes, weights })
}

/// `𝓥(μ) = ∫ V dμ` by sigma-point cubature.
pub fn expect_potential(mu: &GaussianMeasure, v: impl Fn(&DVector<f64>) -> f64) -> Result<f64> {
    Ok(cubature(&mu.mean, &mu.cov)?.expect(v))
}

/// Monte Carlo estimate with its standard error.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct McEstimate {
    pub mean: f64,
    pub std_error: f64,
}

/// `𝓦(μ) = ∬ W(x, y) μ(dx) μ(dy)` from `n` independent pairs.
pub fn expect_interaction<R: Rng + ?Sized>(
    mu: &GaussianMeasure,
    w: impl Fn(&DVector<f64>, &DVector<f64>) -> f64,
    n: usize,
    rng: &mut R,
) -> Result<McEstimate> {
    if n == 0 {
        return Err(invalid("interaction estimate needs at least one sample"));
    }
    let root = sym_sqrt(&mu.cov)?;
    let d = mu.dim();
    let draw = |rng: &mut R| -> DVector<f64> {
        let z = DVector::from_iterator(d, (0..d).map(|_| rng.sample::<f64, _>(StandardNormal)));
        &mu.mean + root.as_matrix() * z
    };
    let mut sum = 0.0;
    let mut sum_sq = 0.0;
    for _ in 0..n {
        let x = draw(rng);
        let y = draw(rng);
        let v = w(&x, &y);
        sum += v;
        sum_sq += v * v;
    }
    let nf = n as f64;
    let mean = sum / nf;
    let var = if n > 1 {
        ((sum_sq - nf * mean * mean) / (nf - 1.0)).max(0.0)
    } else {
        0.0
    };
    Ok(McEstimate {
        mean,
        std_error: (var / nf).sqrt(),
    })
}

/// `𝓤(μ) = ∫ log μ dμ = −(d/2) log(2πe) − ½ log det Σ`; `+∞` for singular `Σ`.
pub fn gauss_entropy(mu: &GaussianMeasure) -> f64 {
    let Ok(eig) = sym_eigen(&mu.cov) else {
        return f64::INFINITY;
    };
    if eig.is_singular() {
        return f64::INFINITY;
    }
    let d = mu.dim() as f64;
    let log_det: f64 = eig.eigenvalues.iter().map(|l| l.ln()).sum();
    -0.5 * d * (2.0 * PI * std::f64::consts::E).ln() - 0.5 * log_det
}

/// `𝓤` evaluated at the eigenvalue-clipped covariance; always finite.
pub fn gauss_entropy_clipped(mu: &GaussianMeasure, eps: f64) -> Result<f64> {
    let clipped = GaussianMeasure {
        mean: mu.mean.clone(),
        cov: clip_min_eig(&mu.cov, eps)?,
    };
    Ok(gauss_entropy(&clipped))
}

/// Pair interaction kernel `W(x, y)`.
#[derive(Clone)]
pub struct InteractionKernel(pub Arc<dyn Fn(&DVector<f64>, &DVector<f64>) -> f64 + Send + Sync>);

impl fmt::Debug for InteractionKernel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("InteractionKernel(..)")
    }
}

#[derive(Clone, Debug)]
pub enum ObjectiveKind {
    KlVsTarget,
    /// `𝓥` alone with `V = −log μ_targ`.
    PotentialOnly,
    /// `𝓥 + 𝓦`. The Monte Carlo estimate of `𝓦` reuses the stream seeded by
    /// `seed` on every call so the objective is a deterministic function.
    PotentialPlusInteraction { kernel: InteractionKernel, seed: u64 },
}

#[derive(Clone, Debug)]
pub struct ObjectiveSpec {
    pub kind: ObjectiveKind,
    pub target: Arc<TargetModel>,
    /// Eigenvalue floor for the entropy; `0` disables clipping.
    pub clip_eps: f64,
    /// Value assigned when the objective is infinite or undefined.
    pub singular_cap: f64,
    pub mc_samples: usize,
    pub kappa: f64,
}

impl ObjectiveSpec {
    pub fn kl(target: Arc<TargetModel>) -> Self {
        ObjectiveSpec {
            kind: ObjectiveKind::KlVsTarget,
            target,
            clip_eps: 0.0,
            singular_cap: DEFAULT_SINGULAR_CAP,
            mc_samples: 1000,
            kappa: DEFAULT_KAPPA,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !self.singular_cap.is_finite() {
            return Err(invalid("singular cap must be finite"));
        }
        if !(self.clip_eps >= 0.0) || !self.clip_eps.is_finite() {
            return Err(invalid("clip_eps must be a finite non-negative number"));
        }
        if !(self.kappa >= 0.0) {
            return Err(invalid("cubature κ must be non-negative"));
        }
        if matches!(self.kind, ObjectiveKind::PotentialPlusInteraction { .. }) && self.mc_samples == 0 {
            return Err(invalid("interaction objective needs mc_samples >= 1"));
        }
        Ok(())
    }

    fn potential(&self, mu: &GaussianMeasure) -> f64 {
        match cubature_with_kappa(&mu.mean, &mu.cov, self.kappa) {
            Ok(rule) => rule.expect(|x| -self.target.log_density(x)),
            Err(_) => f64::NAN,
        }
    }

    fn capped(&self, v: f64) -> f64 {
        if v.is_finite() {
            v
        } else {
            self.singular_cap
        }
    }
}

/// `KL(μ | μ_targ)` for the target in `spec`.
///
/// Without clipping, a singular covariance returns `spec.singular_cap`. With
/// `clip_eps > 0` the clipped entropy is used instead. Any non-finite result
/// is replaced by the cap.
pub fn kl_objective(mu: &GaussianMeasure, spec: &ObjectiveSpec) -> f64 {
    let entropy = if spec.clip_eps > 0.0 {
        gauss_entropy_clipped(mu, spec.clip_eps).unwrap_or(f64::INFINITY)
    } else {
        gauss_entropy(mu)
    };
    if !entropy.is_finite() {
        return spec.singular_cap;
    }
    spec.capped(entropy + spec.potential(mu))
}

/// The functional selected by `spec.kind`.
pub fn objective(mu: &GaussianMeasure, spec: &ObjectiveSpec) -> f64 {
    match &spec.kind {
        ObjectiveKind::KlVsTarget => kl_objective(mu, spec),
        ObjectiveKind::PotentialOnly => spec.capped(spec.potential(mu)),
        ObjectiveKind::PotentialPlusInteraction { kernel, seed } => {
            let mut rng = ChaCha8Rng::seed_from_u64(*seed);
            let w = expect_interaction(mu, |x, y| (kernel.0)(x, y), spec.mc_samples, &mut rng)
                .map(|e| e.mean)
                .unwrap_or(f64::NAN);
            spec.capped(spec.potential(mu) + w)
        }
    }
}

/// `𝓔^#(m, T) = 𝓔(N(m, exp_{Σ⁰}(T)))`.
pub fn objective_sharp(p: &LbwPoint, base: &LbwBase, spec: &ObjectiveSpec) -> f64 {
    match to_gaussian(p, base) {
        Ok(mu) => objective(&mu, spec),
        Err(_) => spec.singular_cap,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn standard_target(d: usize) -> Arc<TargetModel> {
        Arc::new(TargetModel::single(DVector::zeros(d), SymMatrix::identity(d)).unwrap())
    }

    #[test]
    fn logpdf_standard_normal_at_origin() {
        let t = standard_target(2);
        let v = gmm_logpdf(&t, &DVector::zeros(2)).unwrap();
        assert_relative_eq!(v, -(2.0 * PI).ln(), epsilon = 1e-14);
    }

    #[test]
    fn logpdf_split_component_is_invariant() {
        let m = DVector::from_vec(vec![0.3, -1.0]);
        let c = SymMatrix::from_row_slice(2, &[1.0, 0.2, 0.2, 0.6]).unwrap();
        let one = TargetModel::single(m.clone(), c.clone()).unwrap();
        let two = TargetModel::new(vec![0.5, 0.5], vec![m.clone(), m], vec![c.clone(), c]).unwrap();
        for x in [[0.0, 0.0], [2.0, -3.0], [-10.0, 4.0]] {
            let x = DVector::from_row_slice(&x);
            assert_relative_eq!(one.log_density(&x), two.log_density(&x), epsilon = 1e-12);
        }
    }

    #[test]
    fn logpdf_rejects_bad_points() {
        let t = standard_target(2);
        assert!(gmm_logpdf(&t, &DVector::from_vec(vec![f64::NAN, 0.0])).is_err());
        assert!(gmm_logpdf(&t, &DVector::zeros(3)).is_err());
    }

    #[test]
    fn target_validation() {
        let m = DVector::zeros(2);
        let c = SymMatrix::identity(2);
        assert!(TargetModel::new(vec![0.5, 0.4], vec![m.clone(), m.clone()], vec![c.clone(), c.clone()]).is_err());
        assert!(TargetModel::new(vec![1.0, 0.0], vec![m.clone(), m.clone()], vec![c.clone(), c.clone()]).is_err());
        assert!(TargetModel::single(m, SymMatrix::from_diagonal(&[1.0, 0.0])).is_err());
    }

    #[test]
    fn cubature_point_mass() {
        let m = DVector::from_vec(vec![1.0, 2.0, 3.0]);
        let rule = cubature(&m, &SymMatrix::zeros(3)).unwrap();
        assert_eq!(rule.nodes.len(), 7);
        assert!(rule.nodes.iter().all(|x| x == &m));
        assert_relative_eq!(rule.expect(|x| x[0].sin() + x[2].powi(3)), 1f64.sin() + 27.0, epsilon = 1e-12);
    }

    #[test]
    fn cubature_moments() {
        let m = DVector::from_vec(vec![1.0, -2.0]);
        let cov = SymMatrix::from_row_slice(2, &[2.0, 0.7, 0.7, 1.0]).unwrap();
        let rule = cubature(&m, &cov).unwrap();
        assert_relative_eq!(rule.weights.iter().sum::<f64>(), 1.0, epsilon = 1e-15);
        for i in 0..2 {
            assert_relative_eq!(rule.expect(|x| x[i]), m[i], epsilon = 1e-12);
        }
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.5, 3.0]);
        let closed = (&a * cov.as_matrix()).trace() + (m.transpose() * &a * &m)[0];
        assert_relative_eq!(rule.expect(|x| (x.transpose() * &a * x)[0]), closed, max_relative = 1e-12);
    }

    #[test]
    fn cubature_rejects_indefinite() {
        let r = cubature(&DVector::zeros(2), &SymMatrix::from_diagonal(&[1.0, -1.0]));
        assert!(matches!(r, Err(Error::NotPsd { .. })));
    }

    #[test]
    fn expect_potential_cases() {
        let mu = GaussianMeasure::new(
            DVector::from_vec(vec![0.5, 1.5]),
            SymMatrix::from_row_slice(2, &[1.0, 0.3, 0.3, 2.0]).unwrap(),
        )
        .unwrap();
        assert_relative_eq!(expect_potential(&mu, |_| 4.2).unwrap(), 4.2, epsilon = 1e-14);
        let closed = mu.mean.norm_squared() + mu.cov.trace();
        assert_relative_eq!(expect_potential(&mu, |x| x.norm_squared()).unwrap(), closed, epsilon = 1e-10);
    }

    #[test]
    fn interaction_estimates() {
        let mu = GaussianMeasure::new(
            DVector::from_vec(vec![1.0, -1.0]),
            SymMatrix::from_row_slice(2, &[1.0, 0.3, 0.3, 0.5]).unwrap(),
        )
        .unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let c = expect_interaction(&mu, |_, _| 2.5, 100, &mut rng).unwrap();
        assert_eq!(c.mean, 2.5);
        let dot = expect_interaction(&mu, |x, y| x.dot(y), 20_000, &mut rng).unwrap();
        assert!((dot.mean - 2.0).abs() <= 3.0 * dot.std_error);
        let centered = GaussianMeasure::new(DVector::zeros(2), mu.cov.clone()).unwrap();
        let sq = expect_interaction(&centered, |x, y| (x - y).norm_squared(), 20_000, &mut rng).unwrap();
        assert!((sq.mean - 2.0 * mu.cov.trace()).abs() <= 3.0 * sq.std_error);
        assert!(expect_interaction(&mu, |_, _| 0.0, 0, &mut rng).is_err());
    }

    #[test]
    fn entropy_cases() {
        let one = GaussianMeasure::standard(1);
        assert_relative_eq!(gauss_entropy(&one), -0.5 * (2.0 * PI * std::f64::consts::E).ln(), epsilon = 1e-14);
        assert_relative_eq!(gauss_entropy(&one), -1.418_938_533_204_672_7, epsilon = 1e-12);
        let point = GaussianMeasure::new(DVector::zeros(1), SymMatrix::zeros(1)).unwrap();
        assert_eq!(gauss_entropy(&point), f64::INFINITY);
        let d = 3;
        let c = 2.7;
        let scaled = GaussianMeasure::new(DVector::zeros(d), SymMatrix::identity(d).scale(c)).unwrap();
        let diff = gauss_entropy(&scaled) - gauss_entropy(&GaussianMeasure::standard(d));
        assert_relative_eq!(diff, -(d as f64) / 2.0 * c.ln(), epsilon = 1e-12);
    }

    #[test]
    fn clipped_entropy_cases() {
        let mu = GaussianMeasure::new(DVector::zeros(2), SymMatrix::from_diagonal(&[1.0, 0.5])).unwrap();
        assert_eq!(gauss_entropy_clipped(&mu, 0.1).unwrap(), gauss_entropy(&mu));
        let point = GaussianMeasure::new(DVector::zeros(1), SymMatrix::zeros(1)).unwrap();
        let v = gauss_entropy_clipped(&point, 0.01).unwrap();
        assert_relative_eq!(v, -0.5 * (2.0 * PI * std::f64::consts::E * 0.01).ln(), epsilon = 1e-12);
        assert!(gauss_entropy_clipped(&point, 0.0).is_err());
    }

    #[test]
    fn kl_cases() {
        let m = DVector::from_vec(vec![0.4, -0.2]);
        let c = SymMatrix::from_row_slice(2, &[1.3, 0.4, 0.4, 0.8]).unwrap();
        let spec = ObjectiveSpec::kl(Arc::new(TargetModel::single(m.clone(), c.clone()).unwrap()));
        let mu = GaussianMeasure::new(m, c).unwrap();
        assert!(kl_objective(&mu, &spec).abs() < 1e-8);

        let point = GaussianMeasure::new(DVector::zeros(2), SymMatrix::from_diagonal(&[1.0, 0.0])).unwrap();
        assert_eq!(kl_objective(&point, &spec), 1e4);

        let spec = ObjectiveSpec::kl(standard_target(2));
        let shifted = GaussianMeasure::new(DVector::from_vec(vec![1.0, 2.0]), SymMatrix::identity(2)).unwrap();
        assert_relative_eq!(kl_objective(&shifted, &spec), 2.5, epsilon = 1e-8);
    }

    #[test]
    fn kl_with_clipping_is_finite_on_singular() {
        let mut spec = ObjectiveSpec::kl(standard_target(2));
        spec.clip_eps = 1e-3;
        let point = GaussianMeasure::new(DVector::zeros(2), SymMatrix::from_diagonal(&[1.0, 0.0])).unwrap();
        let v = kl_objective(&point, &spec);
        assert!(v.is_finite() && v != spec.singular_cap);
    }

    #[test]
    fn objective_kinds() {
        let target = standard_target(2);
        let mu = GaussianMeasure::new(DVector::from_vec(vec![1.0, 0.0]), SymMatrix::identity(2)).unwrap();
        let mut spec = ObjectiveSpec::kl(target);
        spec.kind = ObjectiveKind::PotentialOnly;
        // E[|x|²/2] + log 2π
        assert_relative_eq!(objective(&mu, &spec), 1.5 + (2.0 * PI).ln(), epsilon = 1e-10);
        spec.kind = ObjectiveKind::PotentialPlusInteraction {
            kernel: InteractionKernel(Arc::new(|_, _| 1.0)),
            seed: 5,
        };
        assert_relative_eq!(objective(&mu, &spec), 2.5 + (2.0 * PI).ln(), epsilon = 1e-10);
        assert_eq!(objective(&mu, &spec), objective(&mu, &spec));
    }

    #[test]
    fn objective_sharp_cases() {
        let base = LbwBase::new(SymMatrix::from_row_slice(2, &[1.5, 0.2, 0.2, 0.7]).unwrap()).unwrap();
        let target = Arc::new(TargetModel::single(DVector::zeros(2), base.sigma0().clone()).unwrap());
        let spec = ObjectiveSpec::kl(target);
        assert!(objective_sharp(&LbwPoint::zero(2), &base, &spec).abs() < 1e-8);
        let collapsed = LbwPoint::new(DVector::zeros(2), -&SymMatrix::identity(2)).unwrap();
        assert_eq!(objective_sharp(&collapsed, &base, &spec), 1e4);
    }

    #[test]
    fn spec_validation() {
        let mut spec = ObjectiveSpec::kl(standard_target(1));
        assert!(spec.validate().is_ok());
        spec.singular_cap = f64::INFINITY;
        assert!(spec.validate().is_err());
        spec.singular_cap = 1e4;
        spec.clip_eps = -1.0;
        assert!(spec.validate().is_err());
    }
}
