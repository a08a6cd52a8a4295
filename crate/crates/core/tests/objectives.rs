mod common;

use std::sync::Arc;

use common::{normal_vec, rng, spd};
use gausscbo::objectives::{cubature, expect_potential, gauss_entropy, gmm_logpdf, kl_objective, ObjectiveSpec, TargetModel};
use gausscbo::{GaussianMeasure, SymMatrix};
use nalgebra::{DMatrix, DVector, SymmetricEigen};
use proptest::prelude::*;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

fn random_gmm(d: usize, k: usize, r: &mut ChaCha8Rng) -> TargetModel {
    let raw: Vec<f64> = (0..k).map(|_| r.random_range(0.2..1.0)).collect();
    let total: f64 = raw.iter().sum();
    let weights = raw.iter().map(|w| w / total).collect();
    let means = (0..k).map(|_| normal_vec(d, r) * 2.0).collect();
    let covs = (0..k).map(|_| spd(d, 0.3, 3.0, r)).collect();
    TargetModel::new(weights, means, covs).unwrap()
}

/// Closed-form KL between two Gaussians.
fn gaussian_kl(p: &GaussianMeasure, q_mean: &DVector<f64>, q_cov: &SymMatrix) -> f64 {
    let d = p.dim() as f64;
    let qi = q_cov.as_matrix().clone().try_inverse().unwrap();
    let dm = q_mean - &p.mean;
    0.5 * ((&qi * p.cov.as_matrix()).trace() + dm.dot(&(&qi * &dm)) - d + q_cov.as_matrix().determinant().ln()
        - p.cov.as_matrix().determinant().ln())
}

/// Probabilists' Gauss-Hermite nodes and weights (weights sum to one), from
/// the eigen-decomposition of the Jacobi matrix.
fn gauss_hermite(n: usize) -> (Vec<f64>, Vec<f64>) {
    let jacobi = DMatrix::from_fn(n, n, |i, j| if i.abs_diff(j) == 1 { (i.max(j) as f64).sqrt() } else { 0.0 });
    let eig = SymmetricEigen::new(jacobi);
    let nodes = eig.eigenvalues.iter().copied().collect();
    let weights = (0..n).map(|i| eig.eigenvectors[(0, i)].powi(2)).collect();
    (nodes, weights)
}

/// `E_μ[f]` for two-dimensional `μ` with a tensor Gauss-Hermite rule.
fn tensor_expect(mu: &GaussianMeasure, n: usize, f: impl Fn(&DVector<f64>) -> f64) -> f64 {
    let (x, w) = gauss_hermite(n);
    let l = mu.cov.as_matrix().clone().cholesky().unwrap().l();
    let mut acc = 0.0;
    for i in 0..n {
        for j in 0..n {
            let z = DVector::from_vec(vec![x[i], x[j]]);
            acc += w[i] * w[j] * f(&(&mu.mean + &l * z));
        }
    }
    acc
}

proptest! {
    #![proptest_config(common::cases(100))]

    #[test]
    fn cubature_integrates_quadratics(d in 1usize..=6, seed in any::<u64>()) {
        let mut r = rng(seed);
        let mu = GaussianMeasure::new(normal_vec(d, &mut r), spd(d, 0.1, 10.0, &mut r)).unwrap();
        let a = common::sym(d, 1.0, &mut r);
        let b = normal_vec(d, &mut r);
        let c: f64 = r.random_range(-3.0..3.0);
        let v = |x: &DVector<f64>| x.dot(&(a.as_matrix() * x)) + b.dot(x) + c;
        let exact = (a.as_matrix() * mu.cov.as_matrix()).trace() + mu.mean.dot(&(a.as_matrix() * &mu.mean)) + b.dot(&mu.mean) + c;
        let got = expect_potential(&mu, v).unwrap();
        let scale = exact.abs().max((a.frobenius_norm() * mu.cov.frobenius_norm()).max(1.0));
        prop_assert!((got - exact).abs() <= 1e-9 * scale);
    }

    #[test]
    fn cubature_integrates_cubics(d in 1usize..=4, seed in any::<u64>()) {
        let mut r = rng(seed);
        let cov = spd(d, 0.1, 5.0, &mut r);
        let rule = cubature(&DVector::zeros(d), &cov).unwrap();
        let u = normal_vec(d, &mut r);
        // odd moments of a centred Gaussian vanish
        let got = rule.expect(|x| u.dot(x).powi(3));
        prop_assert!(got.abs() <= 1e-9 * (u.norm().powi(3) * cov.frobenius_norm().powf(1.5)).max(1.0));
    }

    #[test]
    fn single_gaussian_kl_is_exact(d in 1usize..=5, seed in any::<u64>()) {
        let mut r = rng(seed);
        let target_mean = normal_vec(d, &mut r);
        let target_cov = spd(d, 0.3, 3.0, &mut r);
        let spec = ObjectiveSpec::kl(Arc::new(TargetModel::single(target_mean.clone(), target_cov.clone()).unwrap()));
        let mu = GaussianMeasure::new(normal_vec(d, &mut r), spd(d, 0.3, 3.0, &mut r)).unwrap();
        let exact = gaussian_kl(&mu, &target_mean, &target_cov);
        let got = kl_objective(&mu, &spec);
        prop_assert!((got - exact).abs() <= 1e-8 * exact.max(1.0));
        prop_assert!(got >= -1e-6);
        let own = GaussianMeasure::new(target_mean, target_cov).unwrap();
        prop_assert!(kl_objective(&own, &spec).abs() <= 1e-8);
    }
}

#[test]
fn potential_derivatives_match_finite_differences() {
    let mut r = rng(21);
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let d = r.random_range(1..=4);
        let t = random_gmm(d, 3, &mut r);
        let x = normal_vec(d, &mut r) * 1.5;
        let v = |y: &DVector<f64>| -gmm_logpdf(&t, y).unwrap();
        let (g, h) = t.potential_derivatives(&x);
        let hstep = 1e-5;
        let e = |i: usize| {
            let mut u = DVector::zeros(d);
            u[i] = 1.0;
            u
        };
        for i in 0..d {
            let fd = (v(&(&x + e(i) * hstep)) - v(&(&x - e(i) * hstep))) / (2.0 * hstep);
            worst = worst.max((fd - g[i]).abs() / g[i].abs().max(1.0));
        }
        let hh = 1e-4;
        for i in 0..d {
            for j in 0..d {
                let f = |a: f64, b: f64| v(&(&x + e(i) * a + e(j) * b));
                let fd = (f(hh, hh) - f(hh, -hh) - f(-hh, hh) + f(-hh, -hh)) / (4.0 * hh * hh);
                worst = worst.max((fd - h[(i, j)]).abs() / h[(i, j)].abs().max(1.0));
            }
        }
    }
    println!("worst finite-difference mismatch: {worst:.2e}");
    assert!(worst <= 1e-6, "{worst}");
}

#[test]
fn logpdf_is_finite_far_away() {
    let mut r = rng(5);
    for d in [1, 2, 5] {
        let covs: Vec<SymMatrix> = (0..3).map(|_| spd(d, 1e-4, 1e4, &mut r)).collect();
        let t = TargetModel::new(vec![0.2, 0.3, 0.5], (0..3).map(|_| normal_vec(d, &mut r)).collect(), covs).unwrap();
        for scale in [1.0, 1e3, 1e6] {
            let x = normal_vec(d, &mut r).normalize() * scale;
            let lp = gmm_logpdf(&t, &x).unwrap();
            assert!(lp.is_finite(), "logpdf overflowed at |x| = {scale}");
        }
    }
}

/// Compares the cubature KL with two independent estimates on 2-d mixtures:
/// a 10⁶-sample Monte Carlo average and a 60x60 Gauss-Hermite rule. The
/// entropy is exact, so only the potential term can differ. Monte Carlo must
/// bracket the Gauss-Hermite value; the cubature is allowed to differ from
/// the Monte Carlo value by 3 standard errors plus its measured bias against
/// the Gauss-Hermite value, which is reported.
#[test]
fn kl_against_sampling_oracle() {
    let mut r = rng(2024);
    let mut sample_rng = rng(99);
    let n = 1_000_000;
    println!("{:>4} {:>12} {:>12} {:>12} {:>10} {:>10}", "case", "cubature", "hermite", "monte_carlo", "std_err", "bias");
    for case in 0..20 {
        let target = Arc::new(random_gmm(2, 2 + case % 3, &mut r));
        let spec = ObjectiveSpec::kl(target.clone());
        let mu = GaussianMeasure::new(normal_vec(2, &mut r), spd(2, 0.2, 2.0, &mut r)).unwrap();
        let cub = kl_objective(&mu, &spec);
        let entropy = gauss_entropy(&mu);
        let hermite = entropy + tensor_expect(&mu, 60, |x| -target.log_density(x));

        let l = mu.cov.as_matrix().clone().cholesky().unwrap().l();
        let log_norm = -0.5 * (2.0 * std::f64::consts::PI).ln() * 2.0 - l.diagonal().iter().map(|v| v.ln()).sum::<f64>();
        let (mut sum, mut sum_sq) = (0.0, 0.0);
        for _ in 0..n {
            let z = normal_vec(2, &mut sample_rng);
            let x = &mu.mean + &l * &z;
            let term = log_norm - 0.5 * z.norm_squared() - target.log_density(&x);
            sum += term;
            sum_sq += term * term;
        }
        let mean = sum / n as f64;
        let se = ((sum_sq / n as f64 - mean * mean) / n as f64).sqrt();
        let bias = (cub - hermite).abs();
        println!("{case:>4} {cub:>12.6} {hermite:>12.6} {mean:>12.6} {se:>10.2e} {bias:>10.2e}");
        assert!((mean - hermite).abs() <= 3.0 * se + 1e-9, "Monte Carlo disagrees with the Hermite oracle");
        assert!((mean - cub).abs() <= 3.0 * se + bias + 1e-9);
    }
}
