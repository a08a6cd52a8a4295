//! Bures-Wasserstein gradient flow of `KL(μ | μ_targ)` over Gaussians,
//! discretized by explicit Euler:
//!
//! ```text
//! m ← m − Δt E_μ[∇V]
//! Σ ← Σ + Δt (2I − H Σ − Σ H),   H = E_μ[∇²V]
//! ```
//!
//! Expectations use the same sigma-point rule as the CBO objective. A step
//! whose covariance leaves the SPD cone is retried as two half steps, and so
//! on, so the nominal time grid is kept.

use nalgebra::{DMatrix, DVector};

use crate::bw::GaussianMeasure;
use crate::error::{invalid, Error, Result};
use crate::matrix::{sym_eigen, SymMatrix};
use crate::objectives::{cubature_with_kappa, kl_objective, ObjectiveKind, ObjectiveSpec};

/// Minimum eigenvalue accepted after an Euler sub-step.
pub const GF_EIG_FLOOR: f64 = 1e-10;
/// A step fails once this many sub-steps have been rejected.
pub const GF_MAX_REJECTIONS: usize = 30;

#[derive(Clone, Debug, PartialEq)]
pub struct GfState {
    pub mean: DVector<f64>,
    pub cov: SymMatrix,
    pub dt: f64,
    pub time: f64,
}

impl GfState {
    pub fn new(mean: DVector<f64>, cov: SymMatrix, dt: f64) -> Result<Self> {
        let g = GaussianMeasure::new(mean, cov)?;
        if !(dt >= 0.0) || !dt.is_finite() {
            return Err(invalid(format!("step size must be non-negative, got {dt}")));
        }
        Ok(GfState {
            mean: g.mean,
            cov: g.cov,
            dt,
            time: 0.0,
        })
    }

    pub fn measure(&self) -> GaussianMeasure {
        GaussianMeasure {
            mean: self.mean.clone(),
            cov: self.cov.clone(),
        }
    }
}

/// `(E_μ[∇V], E_μ[∇²V])` under the sigma-point rule.
pub fn expected_derivatives(
    mean: &DVector<f64>,
    cov: &SymMatrix,
    spec: &ObjectiveSpec,
) -> Result<(DVector<f64>, DMatrix<f64>)> {
    let rule = cubature_with_kappa(mean, cov, spec.kappa)?;
    let d = mean.len();
    let mut grad = DVector::zeros(d);
    let mut hess = DMatrix::zeros(d, d);
    for (x, w) in rule.nodes.iter().zip(&rule.weights) {
        let (g, h) = spec.target.potential_derivatives(x);
        grad += g * *w;
        hess += h * *w;
    }
    Ok((grad, hess))
}

/// Time derivative `(ṁ, Σ̇)` of the flow at `(mean, cov)`.
pub fn gf_drift(mean: &DVector<f64>, cov: &SymMatrix, spec: &ObjectiveSpec) -> Result<(DVector<f64>, SymMatrix)> {
    let entropy = match spec.kind {
        ObjectiveKind::KlVsTarget => 2.0,
        ObjectiveKind::PotentialOnly => 0.0,
        ObjectiveKind::PotentialPlusInteraction { .. } => {
            return Err(invalid("gradient flow supports KL and potential objectives only"));
        }
    };
    let (g, h) = expected_derivatives(mean, cov, spec)?;
    let hs = &h * cov.as_matrix();
    let d = mean.len();
    let dcov = DMatrix::identity(d, d) * entropy - &hs - hs.transpose();
    Ok((-g, SymMatrix::symmetrize(dcov)))
}

fn euler(mean: &DVector<f64>, cov: &SymMatrix, h: f64, spec: &ObjectiveSpec) -> Result<Option<(DVector<f64>, SymMatrix)>> {
    let (dm, dcov) = gf_drift(mean, cov, spec)?;
    let m = mean + dm * h;
    let c = cov + &dcov.scale(h);
    if !c.is_finite() || !m.iter().all(|v| v.is_finite()) {
        return Ok(None);
    }
    match sym_eigen(&c) {
        Ok(eig) if eig.min() > GF_EIG_FLOOR => Ok(Some((m, c))),
        _ => Ok(None),
    }
}

/// Advances `s` by `s.dt`.
///
/// A rejected sub-step is halved and the remainder of the interval is covered
/// with the smaller size. More than [`GF_MAX_REJECTIONS`] rejections return
/// [`Error::Instability`] with the last accepted state.
pub fn gf_step(s: &GfState, spec: &ObjectiveSpec) -> Result<GfState> {
    if s.dt == 0.0 {
        return Ok(s.clone());
    }
    let mut mean = s.mean.clone();
    let mut cov = s.cov.clone();
    let mut h = s.dt;
    let mut covered = 0.0;
    let mut rejections = 0;
    while covered < s.dt {
        let step = h.min(s.dt - covered);
        match euler(&mean, &cov, step, spec)? {
            Some((m, c)) => {
                mean = m;
                cov = c;
                covered += step;
                // absorb the round-off left after summing halved sub-steps
                if s.dt - covered <= 1e-12 * s.dt {
                    break;
                }
            }
            None => {
                rejections += 1;
                if rejections > GF_MAX_REJECTIONS {
                    return Err(Error::Instability {
                        time: s.time + covered,
                        rejections,
                        state: Box::new(GfState {
                            mean,
                            cov,
                            dt: s.dt,
                            time: s.time + covered,
                        }),
                    });
                }
                h *= 0.5;
            }
        }
    }
    Ok(GfState {
        mean,
        cov,
        dt: s.dt,
        time: s.time + s.dt,
    })
}

#[derive(Clone, Debug)]
pub struct GfRunConfig {
    pub spec: ObjectiveSpec,
    pub m0: DVector<f64>,
    pub cov0: SymMatrix,
    pub dt: f64,
    pub n_steps: usize,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GfRecord {
    pub step: usize,
    pub time: f64,
    pub kl: f64,
}

#[derive(Clone, Debug)]
pub struct GfRun {
    /// Records for steps `0..=n`, shorter than `n_steps + 1` when truncated.
    pub records: Vec<GfRecord>,
    pub final_state: GfState,
    pub truncated: bool,
}

impl GfRun {
    pub fn final_measure(&self) -> GaussianMeasure {
        self.final_state.measure()
    }
}

/// Runs `n_steps` Euler steps from `N(m0, cov0)`, recording the objective
/// after every step. An unstable step ends the run early with `truncated` set.
pub fn run_gf(config: &GfRunConfig) -> Result<GfRun> {
    config.spec.validate()?;
    if config.m0.len() != config.spec.target.dim() {
        return Err(Error::DimensionMismatch {
            expected: config.spec.target.dim(),
            got: config.m0.len(),
        });
    }
    let mut state = GfState::new(config.m0.clone(), config.cov0.clone(), config.dt)?;
    let mut records = Vec::with_capacity(config.n_steps + 1);
    let kl = |s: &GfState| kl_objective(&s.measure(), &config.spec);
    records.push(GfRecord {
        step: 0,
        time: 0.0,
        kl: kl(&state),
    });
    let mut truncated = false;
    for step in 1..=config.n_steps {
        match gf_step(&state, &config.spec) {
            Ok(next) => state = next,
            Err(Error::Instability { .. }) => {
                truncated = true;
                break;
            }
            Err(e) => return Err(e),
        }
        records.push(GfRecord {
            step,
            time: step as f64 * config.dt,
            kl: kl(&state),
        });
    }
    Ok(GfRun {
        records,
        final_state: state,
        truncated,
    })
}
