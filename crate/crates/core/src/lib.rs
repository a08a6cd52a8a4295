//! Gradient-free optimization over Gaussian measures.
//!
//! Gaussians `N(m, Σ)` are handled through the linearized Bures-Wasserstein
//! chart `(m, T)` at a reference covariance, where a consensus-based particle
//! method runs as it would in a Euclidean space. A Bures-Wasserstein gradient
//! flow is included as a baseline.

pub mod bw;
pub mod cbo;
pub mod error;
pub mod gf;
pub mod lbw;
pub mod matrix;
pub mod objectives;

pub use bw::{bw_barycenter, bw_distance, bw_exp, bw_geodesic, bw_log, BarycenterOptions, GaussianMeasure};
pub use cbo::{
    consensus_point, ensemble_variance, init_ensemble, run_cbo, theorem_constants, CboParams, CboRun, CboRunConfig,
    Ensemble, StepRecord,
};
pub use error::{Error, Result};
pub use gf::{gf_step, run_gf, GfRecord, GfRun, GfRunConfig, GfState};
pub use lbw::{from_gaussian, lbw_inner, lbw_norm, lot_distance, to_gaussian, LbwBase, LbwPoint};
pub use matrix::{clip_min_eig, sym_eigen, sym_sqrt, EigenDecomposition, SymMatrix};
pub use objectives::{gmm_logpdf, kl_objective, objective, objective_sharp, ObjectiveKind, ObjectiveSpec, TargetModel};
