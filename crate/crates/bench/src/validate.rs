//! Self-check suite behind `gausscbo validate`: fast versions of the
//! geometry, objective and dynamics invariants on random instances.

use std::sync::Arc;

use gausscbo::bw::{barycenter_residual, bw_barycenter, bw_distance, bw_exp, bw_log, BarycenterOptions};
use gausscbo::cbo::{cbo_update, consensus_point, laplace_value, CboParams, Ensemble};
use gausscbo::gf::{gf_drift, gf_step, GfState};
use gausscbo::lbw::{lbw_norm, lot_distance, LbwBase, LbwPoint};
use gausscbo::objectives::{expect_potential, kl_objective, ObjectiveSpec, TargetModel};
use gausscbo::{GaussianMeasure, SymMatrix};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::targets::{haar_orthogonal, preset};

#[derive(Clone, Debug)]
pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

fn check(name: &'static str, worst: f64, tol: f64) -> Check {
    Check {
        name,
        passed: worst <= tol,
        detail: format!("worst {worst:.3e} (tolerance {tol:.0e})"),
    }
}

fn spd(d: usize, lo: f64, hi: f64, rng: &mut ChaCha8Rng) -> SymMatrix {
    let q = haar_orthogonal(d, rng);
    let eig = DVector::from_fn(d, |_, _| rng.random_range(lo..=hi));
    SymMatrix::symmetrize(&q * DMatrix::from_diagonal(&eig) * q.transpose())
}

fn normal(d: usize, rng: &mut ChaCha8Rng) -> DVector<f64> {
    DVector::from_fn(d, |_, _| rng.sample::<f64, _>(StandardNormal))
}

fn rel(a: &SymMatrix, b: &SymMatrix) -> f64 {
    (a - b).frobenius_norm() / b.frobenius_norm()
}

fn geometry(rng: &mut ChaCha8Rng) -> Vec<Check> {
    let (mut round_trip, mut metric, mut lot_gap) = (0f64, 0f64, f64::INFINITY);
    for k in 0..100 {
        let d = 2 + k % 5;
        let a = spd(d, 0.2, 5.0, rng);
        let b = spd(d, 0.2, 5.0, rng);
        let log = bw_log(&a, &b).unwrap();
        round_trip = round_trip.max(rel(&bw_exp(&a, &log).unwrap(), &b));
        let ga = GaussianMeasure::new(DVector::zeros(d), a.clone()).unwrap();
        let gb = GaussianMeasure::new(DVector::zeros(d), b).unwrap();
        let dist = bw_distance(&ga, &gb).unwrap();
        let norm_sq = log.weighted_inner(&log, &a);
        metric = metric.max((dist * dist - norm_sq).abs() / norm_sq.max(1e-12));
        let base = LbwBase::identity(d);
        lot_gap = lot_gap.min(lot_distance(&ga, &gb, &base).unwrap() - dist);
    }
    let mut bary = 0f64;
    for k in 0..50 {
        let d = 1 + k % 4;
        let pts: Vec<GaussianMeasure> = (0..5)
            .map(|_| GaussianMeasure::new(normal(d, rng), spd(d, 0.2, 5.0, rng)).unwrap())
            .collect();
        let w = [0.2; 5];
        let bar = bw_barycenter(&pts, &w, BarycenterOptions::default()).unwrap();
        let covs: Vec<&SymMatrix> = pts.iter().map(|p| &p.cov).collect();
        bary = bary.max(barycenter_residual(&covs, &w, &bar.cov).unwrap());
    }
    let mut gram = 0f64;
    for k in 0..50 {
        let base = LbwBase::new(spd(1 + k % 8, 0.1, 10.0, rng)).unwrap();
        gram = gram.max(base.gram_deviation());
    }
    vec![
        check("exp/log round trip", round_trip, 1e-8),
        check("distance equals log norm", metric, 1e-8),
        Check {
            name: "LOT bounds BW",
            passed: lot_gap >= -1e-10,
            detail: format!("smallest LOT - BW {lot_gap:.3e}"),
        },
        check("barycenter residual", bary, 1e-8),
        check("basis Gram deviation", gram, 1e-10),
    ]
}

fn objectives(rng: &mut ChaCha8Rng) -> Vec<Check> {
    let mut quad = 0f64;
    let mut kl = 0f64;
    for k in 0..100 {
        let d = 1 + k % 5;
        let mu = GaussianMeasure::new(normal(d, rng), spd(d, 0.1, 5.0, rng)).unwrap();
        let a = spd(d, 0.1, 2.0, rng);
        let exact = (a.as_matrix() * mu.cov.as_matrix()).trace() + mu.mean.dot(&(a.as_matrix() * &mu.mean));
        let got = expect_potential(&mu, |x| x.dot(&(a.as_matrix() * x))).unwrap();
        quad = quad.max((got - exact).abs() / exact.abs().max(1.0));
        let target = TargetModel::single(mu.mean.clone(), mu.cov.clone()).unwrap();
        kl = kl.max(kl_objective(&mu, &ObjectiveSpec::kl(Arc::new(target))).abs());
    }
    vec![check("cubature on quadratics", quad, 1e-9), check("self-divergence", kl, 1e-8)]
}

fn dynamics(rng: &mut ChaCha8Rng) -> Vec<Check> {
    let spec = ObjectiveSpec::kl(Arc::new(preset("A").expect("preset A")));
    let points: Vec<LbwPoint> = (0..50)
        .map(|_| LbwPoint { m: normal(2, rng) * 2.0, t: SymMatrix::symmetrize(DMatrix::from_fn(2, 2, |_, _| rng.random_range(-0.3..0.3))) })
        .collect();
    let e = Ensemble::from_points(LbwBase::identity(2), points.clone(), 0, &spec).unwrap();
    let obj = e.objectives();
    let e_min = obj.iter().copied().fold(f64::INFINITY, f64::min);
    let mut laplace_ok = true;
    let mut last = f64::INFINITY;
    for alpha in [1.0, 10.0, 1e2, 1e3, 1e4] {
        let v = laplace_value(&obj, alpha);
        laplace_ok &= v <= last + 1e-12 && v >= e_min - 1e-12 && v - e_min <= (obj.len() as f64).ln() / alpha;
        last = v;
    }
    let best = (0..obj.len()).min_by(|&i, &j| obj[i].total_cmp(&obj[j])).unwrap();
    let sharp = consensus_point(&e, 1e6).unwrap();
    let sharp_gap = lbw_norm(&sharp.sub(&points[best]), &e.base).unwrap();

    let mut fixed = Ensemble::from_points(LbwBase::identity(2), vec![points[0].clone(); 5], 3, &spec).unwrap();
    let params = CboParams::default();
    for _ in 0..10 {
        cbo_update(&mut fixed, &params, &spec).unwrap();
    }
    let stationary = fixed.particles.iter().all(|p| p.point == points[0]);

    let mut stat = 0f64;
    let mut descent = f64::NEG_INFINITY;
    for k in 0..50 {
        let d = 1 + k % 4;
        let m = normal(d, rng);
        let c = spd(d, 0.5, 3.0, rng);
        let single = ObjectiveSpec::kl(Arc::new(TargetModel::single(m.clone(), c.clone()).unwrap()));
        let (dm, dc) = gf_drift(&m, &c, &single).unwrap();
        stat = stat.max(dm.amax()).max(dc.as_matrix().amax());
        let s = GfState::new(normal(d, rng), spd(d, 0.2, 4.0, rng), 1e-3).unwrap();
        let before = kl_objective(&s.measure(), &single);
        let after = kl_objective(&gf_step(&s, &single).unwrap().measure(), &single);
        descent = descent.max(after - before);
    }
    vec![
        Check {
            name: "Laplace principle",
            passed: laplace_ok,
            detail: format!("value at alpha=1e4 is {last:.6}, minimum {e_min:.6}"),
        },
        check("sharp consensus near best particle", sharp_gap, 1e-3),
        Check {
            name: "equal ensemble is stationary",
            passed: stationary,
            detail: "10 steps at sigma=5".into(),
        },
        check("GF stationarity at target", stat, 1e-9),
        check("GF descent at dt=1e-3", descent, 1e-8),
    ]
}

/// Runs every check with a fixed seed.
pub fn run_all() -> Vec<Check> {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    let mut out = geometry(&mut rng);
    out.extend(objectives(&mut rng));
    out.extend(dynamics(&mut rng));
    out
}
