//! Consensus-based optimization over Gaussian measures.
//!
//! Each particle is an LBW point `(m, T)`. A step moves every particle towards
//! the exponentially weighted consensus point and adds multiplicative noise
//! proportional to its offset from it, applied coordinate-wise in the
//! orthonormal LBW basis:
//!
//! ```text
//! m ← m + Δt λ (m̄ − m) + √Δt σ (m̄ − m) ⊙ Bᵐ
//! T ← T + Δt λ (T̄ − T) + √Δt σ (T̄ − T) ⊙ Bᵀ
//! ```
//!
//! Every particle owns a ChaCha stream selected by `(seed, particle index)`,
//! so trajectories do not depend on how rayon schedules the updates.

use std::time::Instant;

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::bw::{bw_log, GaussianMeasure};
use crate::error::{invalid, Result};
use crate::lbw::{lbw_norm, rebase, sample_sym_upper, to_gaussian, LbwBase, LbwPoint, REBASE_CLIP};
use crate::matrix::{clip_min_eig, SymMatrix};
use crate::objectives::{objective, objective_sharp, ObjectiveSpec};

#[derive(Clone, Debug, PartialEq)]
pub struct CboParams {
    pub dt: f64,
    pub lambda: f64,
    pub sigma: f64,
    pub alpha: f64,
    pub n_particles: usize,
    pub n_steps: usize,
    /// Time between reference updates; `0` keeps the reference fixed.
    pub rebase_every: f64,
    pub seed: u64,
    /// Coordinate-wise noise when true, scalar `‖D‖` amplitude otherwise.
    pub anisotropic: bool,
}

impl Default for CboParams {
    fn default() -> Self {
        CboParams {
            dt: 0.1,
            lambda: 1.0,
            sigma: 5.0,
            alpha: 1e4,
            n_particles: 20,
            n_steps: 100,
            rebase_every: 0.0,
            seed: 0,
            anisotropic: true,
        }
    }
}

impl CboParams {
    pub fn validate(&self) -> Result<()> {
        let positive = |v: f64| v > 0.0 && v.is_finite();
        if !positive(self.dt) {
            return Err(invalid(format!("dt must be positive, got {}", self.dt)));
        }
        if !positive(self.lambda) {
            return Err(invalid(format!("lambda must be positive, got {}", self.lambda)));
        }
        if !(self.sigma >= 0.0) || !self.sigma.is_finite() {
            return Err(invalid(format!("sigma must be non-negative, got {}", self.sigma)));
        }
        if !positive(self.alpha) {
            return Err(invalid(format!("alpha must be positive, got {}", self.alpha)));
        }
        if self.n_particles == 0 {
            return Err(invalid("need at least one particle"));
        }
        if !(self.rebase_every >= 0.0) || !self.rebase_every.is_finite() {
            return Err(invalid(format!(
                "rebase_every must be non-negative, got {}",
                self.rebase_every
            )));
        }
        Ok(())
    }

    /// Steps between reference updates, `None` when rebasing is disabled.
    pub fn rebase_interval(&self) -> Option<usize> {
        if self.rebase_every <= 0.0 {
            return None;
        }
        Some(((self.rebase_every / self.dt + 1e-9).floor() as usize).max(1))
    }
}

/// Independent stream for particle `index` of a run seeded with `seed`.
pub fn particle_rng(seed: u64, index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index as u64);
    rng
}

#[derive(Clone, Debug)]
pub struct Particle {
    pub point: LbwPoint,
    pub rng: ChaCha8Rng,
    pub objective: f64,
}

/// The empirical measure of `N` particles on a shared LBW chart.
#[derive(Clone, Debug)]
pub struct Ensemble {
    pub base: LbwBase,
    pub particles: Vec<Particle>,
}

impl Ensemble {
    /// Wraps `points` with streams `particle_rng(seed, i)` and evaluates them.
    pub fn from_points(base: LbwBase, points: Vec<LbwPoint>, seed: u64, spec: &ObjectiveSpec) -> Result<Self> {
        let rngs = (0..points.len()).map(|i| particle_rng(seed, i)).collect();
        Self::with_rngs(base, points, rngs, spec)
    }

    pub fn with_rngs(
        base: LbwBase,
        points: Vec<LbwPoint>,
        rngs: Vec<ChaCha8Rng>,
        spec: &ObjectiveSpec,
    ) -> Result<Self> {
        if points.is_empty() {
            return Err(invalid("ensemble needs at least one particle"));
        }
        for p in &points {
            if p.dim() != base.dim() {
                return Err(invalid(format!(
                    "particle dimension {} does not match reference dimension {}",
                    p.dim(),
                    base.dim()
                )));
            }
        }
        let particles = points
            .into_iter()
            .zip(rngs)
            .map(|(point, rng)| Particle {
                point,
                rng,
                objective: f64::NAN,
            })
            .collect();
        let mut e = Ensemble { base, particles };
        e.refresh(spec);
        Ok(e)
    }

    pub fn len(&self) -> usize {
        self.particles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.particles.is_empty()
    }

    pub fn points(&self) -> Vec<LbwPoint> {
        self.particles.iter().map(|p| p.point.clone()).collect()
    }

    pub fn objectives(&self) -> Vec<f64> {
        self.particles.iter().map(|p| p.objective).collect()
    }

    /// Re-evaluates the cached objective of every particle.
    pub fn refresh(&mut self, spec: &ObjectiveSpec) {
        let base = &self.base;
        self.particles
            .par_iter_mut()
            .for_each(|p| p.objective = objective_sharp(&p.point, base, spec));
    }

    fn best_index(&self) -> usize {
        let mut best = 0;
        for (i, p) in self.particles.iter().enumerate() {
            if p.objective < self.particles[best].objective {
                best = i;
            }
        }
        best
    }
}

/// Exponentially weighted mean of the particles.
///
/// Weights are `exp(−α(𝓔ᵢ − min 𝓔))`, and the mean is accumulated as offsets
/// from the best particle, so an ensemble of identical particles returns that
/// particle bit for bit.
pub fn consensus_point(e: &Ensemble, alpha: f64) -> Result<LbwPoint> {
    if e.is_empty() {
        return Err(invalid("consensus of an empty ensemble"));
    }
    let best = e.best_index();
    let e_min = e.particles[best].objective;
    if !e_min.is_finite() {
        return Err(invalid("no particle has a finite objective"));
    }
    let anchor = &e.particles[best].point;
    let d = anchor.dim();
    let mut total = 0.0;
    let mut dm = DVector::zeros(d);
    let mut dt = nalgebra::DMatrix::zeros(d, d);
    for p in &e.particles {
        let w = if alpha == 0.0 {
            1.0
        } else {
            (-alpha * (p.objective - e_min)).exp()
        };
        if w == 0.0 || !w.is_finite() {
            continue;
        }
        total += w;
        dm += (&p.point.m - &anchor.m) * w;
        dt += (p.point.t.as_matrix() - anchor.t.as_matrix()) * w;
    }
    Ok(LbwPoint {
        m: &anchor.m + dm / total,
        t: &anchor.t + &SymMatrix::symmetrize(dt / total),
    })
}

/// `(1/N) Σ ‖zᵢ − z̄‖²` in the LBW norm, `z̄` the unweighted mean.
pub fn ensemble_variance(e: &Ensemble) -> f64 {
    let n = e.len() as f64;
    let points = e.points();
    let weights = vec![1.0 / n; e.len()];
    let Ok(mean) = crate::lbw::lbw_barycenter(&points, &weights) else {
        return f64::NAN;
    };
    points
        .iter()
        .map(|p| lbw_norm(&p.sub(&mean), &e.base).map(|v| v * v).unwrap_or(f64::NAN))
        .sum::<f64>()
        / n
}

/// `−(1/α) log((1/N) Σ exp(−α 𝓔ᵢ))`, evaluated relative to `min 𝓔ᵢ`.
pub fn laplace_value(objectives: &[f64], alpha: f64) -> f64 {
    let e_min = objectives.iter().copied().fold(f64::INFINITY, f64::min);
    let n = objectives.len() as f64;
    let mean = objectives.iter().map(|e| (-alpha * (e - e_min)).exp()).sum::<f64>() / n;
    e_min - mean.ln() / alpha
}

/// Empirical plug-in values of the constants in the CBO convergence bound.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TheoremConstants {
    pub c1: f64,
    pub c2: f64,
    /// `e^{−α E̲} / ‖ω‖_{L²(ρ₀)}`
    pub weight_ratio: f64,
    pub min_objective: f64,
    pub variance: f64,
}

/// `C1 = 2λ − σ² − 2σ² R` and `C2 = 2 Var(ρ₀) R α c_𝓔 (2λ + σ²) / C1` with
/// `R = e^{−α E̲} / ‖ω‖_{L²(ρ₀)}`, using the particle minimum for `E̲`.
/// `hessian_bound` is the user-supplied bound `c_𝓔` on second derivatives.
pub fn theorem_constants(e0: &Ensemble, params: &CboParams, hessian_bound: f64) -> TheoremConstants {
    let obj = e0.objectives();
    let e_min = obj.iter().copied().fold(f64::INFINITY, f64::min);
    let n = obj.len() as f64;
    let mean_sq_weight = obj
        .iter()
        .map(|e| (-2.0 * params.alpha * (e - e_min)).exp())
        .sum::<f64>()
        / n;
    let ratio = 1.0 / mean_sq_weight.sqrt();
    let s2 = params.sigma * params.sigma;
    let c1 = 2.0 * params.lambda - s2 - 2.0 * s2 * ratio;
    let variance = ensemble_variance(e0);
    let c2 = 2.0 * variance * ratio * params.alpha * hessian_bound * (2.0 * params.lambda + s2) / c1;
    TheoremConstants {
        c1,
        c2,
        weight_ratio: ratio,
        min_objective: e_min,
        variance,
    }
}

#[derive(Clone, Debug)]
pub struct StepRecord {
    pub step: usize,
    pub time: f64,
    pub consensus: LbwPoint,
    pub consensus_objective: f64,
    pub min_objective: f64,
    pub median_objective: f64,
    pub variance: f64,
    /// Particles held in place this step because their update was not finite.
    pub frozen: usize,
    pub wall_clock: f64,
}

fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Snapshot of the ensemble at `step`.
pub fn record(e: &Ensemble, step: usize, params: &CboParams, spec: &ObjectiveSpec, frozen: usize, started: Instant) -> Result<StepRecord> {
    let consensus = consensus_point(e, params.alpha)?;
    let consensus_objective = objective_sharp(&consensus, &e.base, spec);
    let obj = e.objectives();
    Ok(StepRecord {
        step,
        time: step as f64 * params.dt,
        consensus,
        consensus_objective,
        min_objective: obj.iter().copied().fold(f64::INFINITY, f64::min),
        median_objective: median(&obj),
        variance: ensemble_variance(e),
        frozen,
        wall_clock: started.elapsed().as_secs_f64(),
    })
}

fn standard_normal_vec<R: Rng + ?Sized>(d: usize, rng: &mut R) -> DVector<f64> {
    DVector::from_iterator(d, (0..d).map(|_| rng.sample::<f64, _>(StandardNormal)))
}

/// Moves every particle once using the consensus of the pre-step ensemble.
///
/// Returns the number of particles whose proposed update was not finite;
/// those keep their previous state.
pub fn cbo_update(e: &mut Ensemble, params: &CboParams, spec: &ObjectiveSpec) -> Result<usize> {
    let consensus = consensus_point(e, params.alpha)?;
    let drift = params.dt * params.lambda;
    let diffusion = params.dt.sqrt() * params.sigma;
    let base = &e.base;
    let d = base.dim();
    let frozen = e
        .particles
        .par_iter_mut()
        .map(|p| {
            let dm = &consensus.m - &p.point.m;
            let dt = &consensus.t - &p.point.t;
            let bm = standard_normal_vec(d, &mut p.rng);
            let bt = base.sample_std_coords(&mut p.rng);
            let (noise_m, noise_t) = if params.anisotropic {
                (dm.component_mul(&bm), base.from_coords(&base.coords(&dt).component_mul(&bt)))
            } else {
                let offset = LbwPoint {
                    m: dm.clone(),
                    t: dt.clone(),
                };
                let amp = lbw_norm(&offset, base).unwrap_or(f64::NAN);
                (bm * amp, base.from_coords(&(bt * amp)))
            };
            let m = &p.point.m + &dm * drift + noise_m * diffusion;
            let t = &(&p.point.t + &dt.scale(drift)) + &noise_t.scale(diffusion);
            let next = LbwPoint { m, t };
            if next.is_finite() {
                p.point = next;
                p.objective = objective_sharp(&p.point, base, spec);
                0
            } else {
                1
            }
        })
        .sum();
    Ok(frozen)
}

/// One Euler-Maruyama step followed by a [`StepRecord`] of the new state.
pub fn cbo_step(e: &mut Ensemble, step: usize, params: &CboParams, spec: &ObjectiveSpec, started: Instant) -> Result<StepRecord> {
    let frozen = cbo_update(e, params, spec)?;
    record(e, step, params, spec, frozen, started)
}

/// Particles around `(m0, log_{Σ⁰}(cov0))`: `mᵢ = m0 + jitter ξᵢ` and
/// `Tᵢ = log_{Σ⁰}(cov0) + jitter Ξᵢ` with `Ξᵢ` a symmetric matrix of i.i.d.
/// standard normals. Draws come from each particle's own stream.
pub fn init_ensemble(
    m0: &DVector<f64>,
    cov0: &SymMatrix,
    jitter: f64,
    params: &CboParams,
    base: LbwBase,
    spec: &ObjectiveSpec,
) -> Result<Ensemble> {
    params.validate()?;
    if m0.len() != base.dim() {
        return Err(invalid("initial mean does not match reference dimension"));
    }
    let center = bw_log(base.sigma0(), cov0)?;
    let d = base.dim();
    let mut points = Vec::with_capacity(params.n_particles);
    let mut rngs = Vec::with_capacity(params.n_particles);
    for i in 0..params.n_particles {
        let mut rng = particle_rng(params.seed, i);
        let m = m0 + standard_normal_vec(d, &mut rng) * jitter;
        let t = &center + &sample_sym_upper(d, &mut rng).scale(jitter);
        points.push(LbwPoint { m, t });
        rngs.push(rng);
    }
    Ensemble::with_rngs(base, points, rngs, spec)
}

#[derive(Clone, Debug)]
pub struct CboRunConfig {
    pub params: CboParams,
    pub spec: ObjectiveSpec,
    pub m0: DVector<f64>,
    pub cov0: SymMatrix,
    pub jitter: f64,
    pub sigma0: SymMatrix,
}

impl CboRunConfig {
    pub fn new(params: CboParams, spec: ObjectiveSpec, m0: DVector<f64>, cov0: SymMatrix) -> Self {
        let d = m0.len();
        CboRunConfig {
            params,
            spec,
            m0,
            cov0,
            jitter: 0.1,
            sigma0: SymMatrix::identity(d),
        }
    }
}

#[derive(Clone, Debug)]
pub struct CboRun {
    /// Records for steps `0..=n_steps`; step 0 is the initial ensemble.
    pub records: Vec<StepRecord>,
    pub final_consensus: GaussianMeasure,
    pub final_ensemble: Ensemble,
    pub frozen_total: usize,
    pub rebases: usize,
    /// Singular particle images clipped during rebases.
    pub rebase_clipped: usize,
}

/// Runs `n_steps` CBO steps, rebasing at the consensus image every
/// `rebase_every / dt` steps when enabled.
pub fn run_cbo(config: &CboRunConfig) -> Result<CboRun> {
    let params = &config.params;
    params.validate()?;
    config.spec.validate()?;
    let started = Instant::now();
    let base = LbwBase::new(config.sigma0.clone())?;
    let mut e = init_ensemble(&config.m0, &config.cov0, config.jitter, params, base, &config.spec)?;
    let mut records = Vec::with_capacity(params.n_steps + 1);
    records.push(record(&e, 0, params, &config.spec, 0, started)?);
    let interval = params.rebase_interval();
    let mut frozen_total = 0;
    let mut rebases = 0;
    let mut rebase_clipped = 0;
    for step in 1..=params.n_steps {
        let mut rec = cbo_step(&mut e, step, params, &config.spec, started)?;
        frozen_total += rec.frozen;
        if interval.is_some_and(|k| step % k == 0 && step < params.n_steps) {
            let image = to_gaussian(&rec.consensus, &e.base)?;
            let sigma0 = clip_min_eig(&image.cov, REBASE_CLIP)?;
            let moved = rebase(&e.points(), &e.base, sigma0)?;
            e.base = moved.base;
            for (p, q) in e.particles.iter_mut().zip(moved.points) {
                p.point = q;
            }
            e.refresh(&config.spec);
            rebases += 1;
            rebase_clipped += moved.clipped;
            // keep the record's consensus in the chart used from now on
            let frozen = rec.frozen;
            rec = record(&e, step, params, &config.spec, frozen, started)?;
        }
        records.push(rec);
    }
    let last = records.last().expect("at least the initial record");
    let final_consensus = to_gaussian(&last.consensus, &e.base)?;
    Ok(CboRun {
        records,
        final_consensus,
        final_ensemble: e,
        frozen_total,
        rebases,
        rebase_clipped,
    })
}

/// `𝓔` of the consensus image, shared with the gradient-flow baseline.
pub fn consensus_objective(run: &CboRun, spec: &ObjectiveSpec) -> f64 {
    objective(&run.final_consensus, spec)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::objectives::TargetModel;
    use approx::assert_relative_eq;
    use std::sync::Arc;

    fn spec_standard(d: usize) -> ObjectiveSpec {
        ObjectiveSpec::kl(Arc::new(TargetModel::single(DVector::zeros(d), SymMatrix::identity(d)).unwrap()))
    }

    fn point(m: &[f64], t: &[f64]) -> LbwPoint {
        let d = m.len();
        LbwPoint::new(DVector::from_row_slice(m), SymMatrix::from_row_slice(d, t).unwrap()).unwrap()
    }

    #[test]
    fn params_validation() {
        assert!(CboParams::default().validate().is_ok());
        for bad in [
            CboParams { dt: 0.0, ..Default::default() },
            CboParams { lambda: -1.0, ..Default::default() },
            CboParams { sigma: -0.1, ..Default::default() },
            CboParams { alpha: 0.0, ..Default::default() },
            CboParams { n_particles: 0, ..Default::default() },
            CboParams { rebase_every: -1.0, ..Default::default() },
        ] {
            assert!(bad.validate().is_err());
        }
    }

    #[test]
    fn rebase_interval_rounding() {
        let p = CboParams { rebase_every: 0.3, ..Default::default() };
        assert_eq!(p.rebase_interval(), Some(3));
        let p = CboParams { rebase_every: 0.1, ..Default::default() };
        assert_eq!(p.rebase_interval(), Some(1));
        assert_eq!(CboParams::default().rebase_interval(), None);
    }

    #[test]
    fn consensus_of_identical_particles() {
        let spec = spec_standard(2);
        let p = point(&[0.1, 0.7], &[0.3, 0.1, 0.1, -0.2]);
        let e = Ensemble::from_points(LbwBase::identity(2), vec![p.clone(); 3], 1, &spec).unwrap();
        assert_eq!(consensus_point(&e, 1e4).unwrap(), p);
    }

    #[test]
    fn consensus_alpha_zero_is_plain_mean() {
        let spec = spec_standard(1);
        let a = point(&[0.0], &[0.0]);
        let b = point(&[2.0], &[1.0]);
        let mut e = Ensemble::from_points(LbwBase::identity(1), vec![a, b], 1, &spec).unwrap();
        // weights ignore objectives entirely
        e.particles[0].objective = 5.0;
        e.particles[1].objective = 0.0;
        let c = consensus_point(&e, 0.0).unwrap();
        assert_relative_eq!(c.m[0], 1.0, epsilon = 1e-15);
        assert_relative_eq!(c.t.get(0, 0), 0.5, epsilon = 1e-15);
    }

    #[test]
    fn all_equal_ensemble_is_stationary() {
        let spec = spec_standard(2);
        let p = point(&[1.3, -0.4], &[0.3, 0.1, 0.1, -0.2]);
        let mut e = Ensemble::from_points(LbwBase::identity(2), vec![p.clone(); 4], 9, &spec).unwrap();
        let params = CboParams { sigma: 5.0, ..Default::default() };
        for _ in 0..5 {
            cbo_update(&mut e, &params, &spec).unwrap();
        }
        assert!(e.particles.iter().all(|q| q.point == p));
    }

    #[test]
    fn single_particle_without_noise_is_stationary() {
        let spec = spec_standard(2);
        let p = point(&[3.0, 1.0], &[0.5, 0.0, 0.0, 0.1]);
        let mut e = Ensemble::from_points(LbwBase::identity(2), vec![p.clone()], 2, &spec).unwrap();
        let params = CboParams { sigma: 0.0, n_particles: 1, ..Default::default() };
        cbo_update(&mut e, &params, &spec).unwrap();
        assert_eq!(e.particles[0].point, p);
    }

    #[test]
    fn non_finite_updates_freeze_particles() {
        let spec = spec_standard(1);
        let a = point(&[0.0], &[0.0]);
        let b = point(&[1e308], &[0.0]);
        let mut e = Ensemble::from_points(LbwBase::identity(1), vec![a, b.clone()], 3, &spec).unwrap();
        // Put the far particle at the best objective so the consensus sits on
        // it, then make the near particle's offset overflow under the noise.
        e.particles[1].objective = -1.0;
        let params = CboParams { sigma: 1e10, ..Default::default() };
        let frozen = cbo_update(&mut e, &params, &spec).unwrap();
        assert_eq!(frozen, 1);
        assert_eq!(e.particles[0].point, point(&[0.0], &[0.0]));
    }

    #[test]
    fn variance_examples() {
        let spec = spec_standard(1);
        let base = LbwBase::identity(1);
        let same = Ensemble::from_points(base.clone(), vec![point(&[1.0], &[0.2]); 3], 0, &spec).unwrap();
        assert_eq!(ensemble_variance(&same), 0.0);
        // two points at LBW distance 2
        let e = Ensemble::from_points(base.clone(), vec![point(&[-1.0], &[0.0]), point(&[1.0], &[0.0])], 0, &spec).unwrap();
        assert_relative_eq!(ensemble_variance(&e), 1.0, epsilon = 1e-15);
        let shifted = Ensemble::from_points(base, vec![point(&[4.0], &[0.5]), point(&[6.0], &[0.5])], 0, &spec).unwrap();
        assert_relative_eq!(ensemble_variance(&shifted), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn theorem_constants_examples() {
        let spec = spec_standard(2);
        let e = Ensemble::from_points(
            LbwBase::identity(2),
            vec![point(&[0.0, 0.0], &[0.0; 4]), point(&[1.0, 0.5], &[0.1, 0.0, 0.0, 0.2])],
            0,
            &spec,
        )
        .unwrap();
        let params = CboParams { sigma: 0.0, lambda: 1.0, alpha: 10.0, ..Default::default() };
        let c = theorem_constants(&e, &params, 1.0);
        assert_eq!(c.c1, 2.0);
        let params = CboParams { sigma: 0.3, lambda: 0.7, alpha: 3.0, ..Default::default() };
        let c = theorem_constants(&e, &params, 2.0);
        let mut shifted = e.clone();
        for p in &mut shifted.particles {
            p.objective += 123.0;
        }
        let s = theorem_constants(&shifted, &params, 2.0);
        assert_relative_eq!(c.c1, s.c1, epsilon = 1e-12);
        assert_relative_eq!(c.c2, s.c2, max_relative = 1e-12);
    }

    #[test]
    fn laplace_value_bounds() {
        let obj = [0.3, 1.2, 0.9, 5.0];
        for alpha in [1.0, 10.0, 100.0] {
            let v = laplace_value(&obj, alpha);
            assert!(v >= 0.3 && v <= 0.3 + (4f64).ln() / alpha);
        }
    }

    #[test]
    fn init_ensemble_examples() {
        let spec = spec_standard(2);
        let m0 = DVector::from_vec(vec![1.0, -1.0]);
        let cov0 = SymMatrix::from_diagonal(&[4.0, 1.0]);
        let params = CboParams { n_particles: 5, ..Default::default() };
        let e = init_ensemble(&m0, &cov0, 0.0, &params, LbwBase::identity(2), &spec).unwrap();
        for p in &e.particles {
            assert_eq!(p.point.m, m0);
            assert!((p.point.t.as_matrix() - SymMatrix::from_diagonal(&[1.0, 0.0]).as_matrix()).amax() < 1e-14);
        }
        let e = init_ensemble(&m0, &SymMatrix::identity(2), 0.0, &params, LbwBase::identity(2), &spec).unwrap();
        assert!(e.particles.iter().all(|p| p.point.t.frobenius_norm() < 1e-14));
    }

    #[test]
    fn run_at_optimum_is_flat() {
        let spec = spec_standard(2);
        let params = CboParams { sigma: 0.0, n_particles: 1, n_steps: 20, ..Default::default() };
        let mut cfg = CboRunConfig::new(params, spec, DVector::zeros(2), SymMatrix::identity(2));
        cfg.jitter = 0.0;
        let run = run_cbo(&cfg).unwrap();
        assert_eq!(run.records.len(), 21);
        for r in &run.records {
            assert!(r.consensus_objective.abs() <= 1e-8);
        }
        assert_relative_eq!(run.records[20].time, 2.0, epsilon = 1e-12);
    }

    #[test]
    fn run_with_rebasing_counts_updates() {
        let spec = spec_standard(2);
        let params = CboParams { n_particles: 6, n_steps: 10, rebase_every: 0.3, seed: 4, ..Default::default() };
        let cfg = CboRunConfig::new(params, spec, DVector::from_vec(vec![1.0, 1.0]), SymMatrix::identity(2));
        let run = run_cbo(&cfg).unwrap();
        assert_eq!(run.rebases, 3);
        assert_eq!(run.records.len(), 11);
    }
}
