#![allow(dead_code)]

use gausscbo::SymMatrix;
use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand::SeedableRng;
use rand_distr::StandardNormal;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn normal_vec(d: usize, rng: &mut ChaCha8Rng) -> DVector<f64> {
    DVector::from_iterator(d, (0..d).map(|_| rng.sample::<f64, _>(StandardNormal)))
}

pub fn orthogonal(d: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
    let g = DMatrix::from_fn(d, d, |_, _| rng.sample::<f64, _>(StandardNormal));
    let qr = g.qr();
    let mut q = qr.q();
    let r = qr.r();
    for j in 0..d {
        if r[(j, j)] < 0.0 {
            q.column_mut(j).neg_mut();
        }
    }
    q
}

/// SPD matrix with log-uniform eigenvalues in `[lo, hi]` and a random frame.
pub fn spd(d: usize, lo: f64, hi: f64, rng: &mut ChaCha8Rng) -> SymMatrix {
    let q = orthogonal(d, rng);
    let eig = DVector::from_iterator(d, (0..d).map(|_| (rng.random_range(lo.ln()..=hi.ln())).exp()));
    SymMatrix::symmetrize(&q * DMatrix::from_diagonal(&eig) * q.transpose())
}

pub fn sym(d: usize, scale: f64, rng: &mut ChaCha8Rng) -> SymMatrix {
    let g = DMatrix::from_fn(d, d, |_, _| rng.sample::<f64, _>(StandardNormal) * scale);
    SymMatrix::symmetrize(&g + g.transpose()).scale(0.5)
}

pub fn rel_diff(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    (a - b).norm() / b.norm().max(1e-300)
}

pub fn cases(n: u32) -> proptest::prelude::ProptestConfig {
    proptest::prelude::ProptestConfig {
        cases: n,
        failure_persistence: None,
        ..Default::default()
    }
}
