//! Target mixtures: the four 2-d presets, a plain-text file format, and the
//! random high-dimensional mixtures used for the d = 10 study.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use anyhow::{anyhow, bail, Context, Result};
use gausscbo::{SymMatrix, TargetModel};
use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{Gamma, StandardNormal};

pub const PRESETS: [&str; 4] = ["A", "B", "C", "D"];

fn mixture(weights: &[f64], means: &[[f64; 2]], covs: &[[f64; 4]]) -> TargetModel {
    TargetModel::new(
        weights.to_vec(),
        means.iter().map(|m| DVector::from_row_slice(m)).collect(),
        covs.iter().map(|c| SymMatrix::from_row_slice(2, c).expect("preset covariance")).collect(),
    )
    .expect("preset mixture")
}

/// One of the 2-d benchmark mixtures `A`-`D`.
pub fn preset(name: &str) -> Option<TargetModel> {
    let t = match name.to_ascii_uppercase().as_str() {
        "A" => mixture(
            &[0.5, 0.5],
            &[[-2.2, 0.0], [2.2, 0.0]],
            &[[1.0, 0.2, 0.2, 0.6], [1.0, -0.2, -0.2, 0.6]],
        ),
        "B" => mixture(
            &[0.5, 0.5],
            &[[-1.77, 1.06], [-0.35, -0.35]],
            &[[1.25, -0.25, -0.25, 1.25], [2.5, -1.5, -1.5, 2.5]],
        ),
        "C" => mixture(
            &[0.25, 0.30, 0.30, 0.15],
            &[[-2.47, 1.06], [-1.48, 0.64], [-2.05, 0.07], [0.20, -1.61]],
            &[
                [0.45, 0.0, 0.0, 0.45],
                [1.9, -1.9, -1.9, 2.3],
                [2.3, -1.9, -1.9, 1.9],
                [2.51, -2.49, -2.49, 2.51],
            ],
        ),
        "D" => mixture(
            &[0.2, 0.2, 0.2, 0.4],
            &[[-1.5, -2.0], [1.5, 0.7], [-1.5, 0.7], [1.5, -2.0]],
            &[[0.7, 0.0, 0.0, 0.5]; 4],
        ),
        _ => return None,
    };
    Some(t)
}

/// A preset name or the path of a target file.
pub fn load_target(name_or_path: &str) -> Result<TargetModel> {
    if let Some(t) = preset(name_or_path) {
        return Ok(t);
    }
    let path = Path::new(name_or_path);
    if !path.exists() {
        bail!("unknown target '{name_or_path}' (expected one of A, B, C, D or a target file)");
    }
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    parse_target(&text).with_context(|| format!("parsing {}", path.display()))
}

fn join(values: impl IntoIterator<Item = f64>) -> String {
    values.into_iter().map(|v| format!("{v:?}")).collect::<Vec<_>>().join(",")
}

/// Serializes a mixture as `key=value` lines:
///
/// ```text
/// dim=2
/// components=2
/// weight.0=0.5
/// mean.0=-2.2,0.0
/// cov.0=1.0,0.2,0.2,0.6
/// ```
///
/// Covariances are row-major. Floats are written with enough digits to
/// round-trip exactly.
pub fn format_target(t: &TargetModel) -> String {
    let mut out = String::new();
    writeln!(out, "dim={}", t.dim()).unwrap();
    writeln!(out, "components={}", t.components()).unwrap();
    for k in 0..t.components() {
        writeln!(out, "weight.{k}={:?}", t.weights()[k]).unwrap();
        writeln!(out, "mean.{k}={}", join(t.means()[k].iter().copied())).unwrap();
        writeln!(out, "cov.{k}={}", join(t.covs()[k].to_row_major())).unwrap();
    }
    out
}

pub fn save_target(t: &TargetModel, path: &Path) -> Result<()> {
    std::fs::write(path, format_target(t)).with_context(|| format!("writing {}", path.display()))
}

/// Reads `key=value` lines, skipping blanks and `#` comments.
pub fn parse_key_values(text: &str) -> Result<BTreeMap<String, String>> {
    let mut map = BTreeMap::new();
    for (no, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| anyhow!("line {}: expected key=value, got '{raw}'", no + 1))?;
        if map.insert(k.trim().to_string(), v.trim().to_string()).is_some() {
            bail!("line {}: duplicate key '{}'", no + 1, k.trim());
        }
    }
    Ok(map)
}

fn floats(s: &str) -> Result<Vec<f64>> {
    s.split(',')
        .map(|v| v.trim().parse::<f64>().map_err(|e| anyhow!("bad number '{v}': {e}")))
        .collect()
}

pub fn parse_target(text: &str) -> Result<TargetModel> {
    let kv = parse_key_values(text)?;
    let get = |k: &str| kv.get(k).ok_or_else(|| anyhow!("missing key '{k}'"));
    let dim: usize = get("dim")?.parse().context("dim")?;
    let k: usize = get("components")?.parse().context("components")?;
    let mut weights = Vec::with_capacity(k);
    let mut means = Vec::with_capacity(k);
    let mut covs = Vec::with_capacity(k);
    for i in 0..k {
        weights.push(get(&format!("weight.{i}"))?.parse::<f64>().with_context(|| format!("weight.{i}"))?);
        let m = floats(get(&format!("mean.{i}"))?)?;
        if m.len() != dim {
            bail!("mean.{i} has {} entries, expected {dim}", m.len());
        }
        means.push(DVector::from_vec(m));
        let c = floats(get(&format!("cov.{i}"))?)?;
        if c.len() != dim * dim {
            bail!("cov.{i} has {} entries, expected {}", c.len(), dim * dim);
        }
        covs.push(SymMatrix::from_row_slice(dim, &c)?);
    }
    let known = 2 + 3 * k;
    if kv.len() != known {
        bail!("unexpected keys in target file");
    }
    Ok(TargetModel::new(weights, means, covs)?)
}

#[derive(Clone, Debug, PartialEq, serde::Serialize)]
pub struct RandomGmmSpec {
    pub dim: usize,
    pub components: usize,
    pub r_mean: f64,
    pub lam_min: f64,
    pub lam_max: f64,
    pub concentration: f64,
}

impl Default for RandomGmmSpec {
    fn default() -> Self {
        RandomGmmSpec {
            dim: 10,
            components: 5,
            r_mean: 3.0,
            lam_min: 0.4,
            lam_max: 2.0,
            concentration: 1.0,
        }
    }
}

impl RandomGmmSpec {
    pub fn validate(&self) -> Result<()> {
        if self.dim == 0 || self.components == 0 {
            bail!("random mixture needs dim >= 1 and components >= 1");
        }
        if !(self.lam_min > 0.0 && self.lam_min <= self.lam_max && self.lam_max.is_finite()) {
            bail!("need 0 < lam_min <= lam_max, got [{}, {}]", self.lam_min, self.lam_max);
        }
        if !(self.r_mean >= 0.0 && self.r_mean.is_finite()) {
            bail!("r_mean must be non-negative");
        }
        if !(self.concentration > 0.0 && self.concentration.is_finite()) {
            bail!("Dirichlet concentration must be positive");
        }
        Ok(())
    }
}

/// Haar-distributed orthogonal matrix: QR of a Gaussian matrix with the signs
/// of `R`'s diagonal folded into `Q`.
pub fn haar_orthogonal<R: Rng + ?Sized>(d: usize, rng: &mut R) -> DMatrix<f64> {
    let g = DMatrix::from_fn(d, d, |_, _| rng.sample::<f64, _>(StandardNormal));
    let qr = g.qr();
    let r = qr.r();
    let mut q = qr.q();
    for j in 0..d {
        if r[(j, j)] < 0.0 {
            q.column_mut(j).neg_mut();
        }
    }
    q
}

/// Mixture with Dirichlet weights, means uniform on the sphere of radius
/// `r_mean·√d`, and covariances `Q diag(λ) Qᵀ` with Haar `Q` and
/// `λ ~ Uniform[lam_min, lam_max]`.
pub fn random_gmm<R: Rng + ?Sized>(spec: &RandomGmmSpec, rng: &mut R) -> Result<TargetModel> {
    spec.validate()?;
    let d = spec.dim;
    let gamma = Gamma::new(spec.concentration, 1.0)?;
    let mut weights: Vec<f64> = (0..spec.components).map(|_| rng.sample(gamma)).collect();
    // a concentration far below one can underflow every draw
    if weights.iter().all(|&w| w == 0.0) {
        weights.iter_mut().for_each(|w| *w = 1.0);
    }
    let total: f64 = weights.iter().sum();
    let weights: Vec<f64> = weights.iter().map(|w| (w / total).max(f64::MIN_POSITIVE)).collect();
    let total: f64 = weights.iter().sum();
    let weights = weights.iter().map(|w| w / total).collect();
    let radius = spec.r_mean * (d as f64).sqrt();
    let mut means = Vec::with_capacity(spec.components);
    let mut covs = Vec::with_capacity(spec.components);
    for _ in 0..spec.components {
        let mut dir = DVector::from_fn(d, |_, _| rng.sample::<f64, _>(StandardNormal));
        while dir.norm() == 0.0 {
            dir = DVector::from_fn(d, |_, _| rng.sample::<f64, _>(StandardNormal));
        }
        means.push(dir.normalize() * radius);
        let q = haar_orthogonal(d, rng);
        let lam = DVector::from_fn(d, |_, _| rng.random_range(spec.lam_min..=spec.lam_max));
        covs.push(SymMatrix::symmetrize(&q * DMatrix::from_diagonal(&lam) * q.transpose()));
    }
    Ok(TargetModel::new(weights, means, covs)?)
}
