//! Multi-seed orchestration: builds the runs of an experiment, executes them
//! on the rayon pool, and folds the trajectories into a report.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;
use std::sync::Arc;
use std::time::Instant;

use anyhow::{bail, Context, Result};
use gausscbo::cbo::{run_cbo, CboParams, CboRunConfig};
use gausscbo::gf::{run_gf, GfRunConfig};
use gausscbo::{GaussianMeasure, ObjectiveSpec, SymMatrix, TargetModel};
use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::output::{cbo_csv, gf_csv};
use crate::stats::{quantile, Band};
use crate::targets::{format_target, random_gmm, RandomGmmSpec};

/// Stream of a run's seed reserved for the initial mean. Particle streams use
/// the indices `0..N`.
pub const INIT_STREAM: u64 = u64::MAX;
/// Stream of an instance seed reserved for drawing its random target.
pub const TARGET_STREAM: u64 = u64::MAX - 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Cbo,
    Gf,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::Cbo => "cbo",
            Method::Gf => "gf",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = anyhow::Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "cbo" => Ok(Method::Cbo),
            "gf" => Ok(Method::Gf),
            _ => bail!("unknown method '{s}' (expected cbo or gf)"),
        }
    }
}

/// Parses `cbo`, `gf`, or `both`.
pub fn parse_methods(s: &str) -> Result<Vec<Method>> {
    if s.eq_ignore_ascii_case("both") {
        return Ok(vec![Method::Cbo, Method::Gf]);
    }
    s.split(',').map(|m| m.trim().parse()).collect()
}

/// Dynamics and initialization shared by both methods.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Settings {
    pub dt: f64,
    pub steps: usize,
    pub lambda: f64,
    pub sigma: f64,
    pub alpha: f64,
    pub particles: usize,
    pub rebase_every: f64,
    pub anisotropic: bool,
    /// Spread of the CBO particles around the initial Gaussian.
    pub jitter: f64,
    /// Initial means are drawn from `Unif([−h, h]^d)`; the initial covariance is `I`.
    pub init_half_width: f64,
}

impl Default for Settings {
    fn default() -> Self {
        Settings {
            dt: 0.1,
            steps: 100,
            lambda: 1.0,
            sigma: 5.0,
            alpha: 1e4,
            particles: 20,
            rebase_every: 0.0,
            anisotropic: true,
            jitter: 0.1,
            init_half_width: 5.0,
        }
    }
}

impl Settings {
    pub fn cbo_params(&self, seed: u64) -> CboParams {
        CboParams {
            dt: self.dt,
            lambda: self.lambda,
            sigma: self.sigma,
            alpha: self.alpha,
            n_particles: self.particles,
            n_steps: self.steps,
            rebase_every: self.rebase_every,
            seed,
            anisotropic: self.anisotropic,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.cbo_params(0).validate()?;
        if !(self.jitter >= 0.0 && self.jitter.is_finite()) {
            bail!("jitter must be non-negative");
        }
        if !(self.init_half_width >= 0.0 && self.init_half_width.is_finite()) {
            bail!("init_half_width must be non-negative");
        }
        Ok(())
    }

    pub fn horizon(&self) -> f64 {
        self.steps as f64 * self.dt
    }
}

/// Initial mean of run `seed`, shared by both methods.
pub fn initial_mean(dim: usize, half_width: f64, seed: u64) -> DVector<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(INIT_STREAM);
    DVector::from_fn(dim, |_, _| {
        if half_width == 0.0 {
            0.0
        } else {
            rng.random_range(-half_width..=half_width)
        }
    })
}

/// Target of random instance `seed`.
pub fn instance_target(spec: &RandomGmmSpec, seed: u64) -> Result<TargetModel> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(TARGET_STREAM);
    random_gmm(spec, &mut rng)
}

#[derive(Clone, Debug)]
pub struct RunResult {
    pub instance: usize,
    pub seed: u64,
    pub method: Method,
    pub time: Vec<f64>,
    /// Objective of the consensus (CBO) or of the current state (GF).
    pub kl: Vec<f64>,
    /// Ensemble variance per step, empty for GF.
    pub variance: Vec<f64>,
    pub csv: String,
    pub truncated: bool,
    pub frozen_total: usize,
    pub final_measure: GaussianMeasure,
}

impl RunResult {
    pub fn key(&self) -> (usize, u64, Method) {
        (self.instance, self.seed, self.method)
    }

    pub fn final_kl(&self) -> f64 {
        self.kl.last().copied().unwrap_or(f64::NAN)
    }
}

/// One trajectory of `method` on `target` from the initial mean of `seed`.
pub fn run_one(target: &Arc<TargetModel>, method: Method, s: &Settings, seed: u64, instance: usize) -> Result<RunResult> {
    s.validate()?;
    let dim = target.dim();
    let m0 = initial_mean(dim, s.init_half_width, seed);
    let cov0 = SymMatrix::identity(dim);
    let spec = ObjectiveSpec::kl(target.clone());
    match method {
        Method::Cbo => {
            let mut cfg = CboRunConfig::new(s.cbo_params(seed), spec, m0, cov0);
            cfg.jitter = s.jitter;
            let run = run_cbo(&cfg)?;
            Ok(RunResult {
                instance,
                seed,
                method,
                time: run.records.iter().map(|r| r.time).collect(),
                kl: run.records.iter().map(|r| r.consensus_objective).collect(),
                variance: run.records.iter().map(|r| r.variance).collect(),
                csv: cbo_csv(&run.records),
                truncated: false,
                frozen_total: run.frozen_total,
                final_measure: run.final_consensus,
            })
        }
        Method::Gf => {
            let run = run_gf(&GfRunConfig {
                spec,
                m0,
                cov0,
                dt: s.dt,
                n_steps: s.steps,
            })?;
            Ok(RunResult {
                instance,
                seed,
                method,
                time: run.records.iter().map(|r| r.time).collect(),
                kl: run.records.iter().map(|r| r.kl).collect(),
                variance: Vec::new(),
                csv: gf_csv(&run.records),
                truncated: run.truncated,
                frozen_total: 0,
                final_measure: run.final_measure(),
            })
        }
    }
}

#[derive(Clone, Debug, Serialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Problem {
    Fixed {
        name: String,
        #[serde(skip)]
        target: Arc<TargetModel>,
    },
    Random {
        spec: RandomGmmSpec,
        instances: usize,
    },
}

#[derive(Clone, Debug, Serialize)]
pub struct Experiment {
    pub problem: Problem,
    pub methods: Vec<Method>,
    pub settings: Settings,
    /// First seed; run `i` uses `seed + i`.
    pub seed: u64,
    /// Runs per method for a fixed target. Random problems run one seed per instance.
    pub seeds: usize,
}

impl Experiment {
    pub fn fixed(name: &str, target: TargetModel, methods: Vec<Method>, settings: Settings, seed: u64, seeds: usize) -> Self {
        Experiment {
            problem: Problem::Fixed {
                name: name.to_string(),
                target: Arc::new(target),
            },
            methods,
            settings,
            seed,
            seeds,
        }
    }

    pub fn random(spec: RandomGmmSpec, instances: usize, methods: Vec<Method>, settings: Settings, seed: u64) -> Self {
        Experiment {
            problem: Problem::Random { spec, instances },
            methods,
            settings,
            seed,
            seeds: instances,
        }
    }

    pub fn is_relative(&self) -> bool {
        matches!(self.problem, Problem::Random { .. })
    }

    /// `(instance, seed, target)` for every run slot.
    pub fn slots(&self) -> Result<Vec<(usize, u64, Arc<TargetModel>)>> {
        match &self.problem {
            Problem::Fixed { target, .. } => Ok((0..self.seeds)
                .map(|i| (0, self.seed + i as u64, target.clone()))
                .collect()),
            Problem::Random { spec, instances } => (0..*instances)
                .map(|i| {
                    let seed = self.seed + i as u64;
                    Ok((i, seed, Arc::new(instance_target(spec, seed)?)))
                })
                .collect(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FinalStats {
    pub median: f64,
    pub q25: f64,
    pub q75: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RunFailure {
    pub instance: usize,
    pub seed: u64,
    pub method: Method,
    pub error: String,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Report {
    pub config: serde_json::Value,
    pub config_hash: String,
    /// True when trajectories are divided by the best value of their instance.
    pub relative: bool,
    pub methods: BTreeMap<String, Band>,
    #[serde(rename = "final")]
    pub final_values: BTreeMap<String, FinalStats>,
    pub seeds: Vec<u64>,
    /// Per-instance best value used for normalization, in instance order.
    pub best_kl: Vec<f64>,
    pub truncated: Vec<(usize, u64, Method)>,
    pub failures: Vec<RunFailure>,
    pub wall_clock: f64,
}

/// 64-bit FNV-1a, used to fingerprint the configuration echo.
fn fnv1a(bytes: &[u8]) -> u64 {
    bytes.iter().fold(0xcbf2_9ce4_8422_2325, |h, &b| (h ^ b as u64).wrapping_mul(0x0100_0000_01b3))
}

/// Divides every trajectory by the smallest finite value reached on its
/// instance by any method at any time. Returns the divisors by instance.
pub fn normalize_by_instance(runs: &mut [RunResult]) -> Result<Vec<f64>> {
    let mut best: BTreeMap<usize, f64> = BTreeMap::new();
    for r in runs.iter() {
        let m = r.kl.iter().copied().filter(|v| v.is_finite()).fold(f64::INFINITY, f64::min);
        let e = best.entry(r.instance).or_insert(f64::INFINITY);
        *e = e.min(m);
    }
    for (i, k) in &best {
        if !(*k > 0.0 && k.is_finite()) {
            bail!("instance {i}: best objective {k} cannot normalize trajectories");
        }
    }
    for r in runs.iter_mut() {
        let k = best[&r.instance];
        r.kl.iter_mut().for_each(|v| *v /= k);
    }
    Ok(best.into_values().collect())
}

/// Folds finished runs into a report. The result depends only on the set of
/// runs, not on their order.
pub fn aggregate(
    exp: &Experiment,
    runs: &[RunResult],
    failures: Vec<RunFailure>,
    best_kl: Vec<f64>,
    wall_clock: f64,
) -> Result<Report> {
    let mut sorted: Vec<&RunResult> = runs.iter().collect();
    sorted.sort_by_key(|r| r.key());
    let mut failures = failures;
    failures.sort_by_key(|f| (f.instance, f.seed, f.method));
    let config = serde_json::to_value(exp)?;
    let config_hash = format!("{:016x}", fnv1a(serde_json::to_string(&config)?.as_bytes()));
    let mut methods = BTreeMap::new();
    let mut final_values = BTreeMap::new();
    for &method in &exp.methods {
        let mine: Vec<&RunResult> = sorted.iter().copied().filter(|r| r.method == method).collect();
        let time = mine
            .iter()
            .map(|r| &r.time)
            .max_by_key(|t| t.len())
            .cloned()
            .unwrap_or_default();
        let trajectories: Vec<&[f64]> = mine.iter().map(|r| r.kl.as_slice()).collect();
        methods.insert(method.name().to_string(), Band::from_runs(&time, &trajectories));
        let finals: Vec<f64> = mine.iter().map(|r| r.final_kl()).collect();
        final_values.insert(
            method.name().to_string(),
            FinalStats {
                median: quantile(&finals, 0.5),
                q25: quantile(&finals, 0.25),
                q75: quantile(&finals, 0.75),
            },
        );
    }
    let mut seeds: Vec<u64> = sorted.iter().map(|r| r.seed).chain(failures.iter().map(|f| f.seed)).collect();
    seeds.sort_unstable();
    seeds.dedup();
    Ok(Report {
        config,
        config_hash,
        relative: exp.is_relative(),
        methods,
        final_values,
        seeds,
        best_kl,
        truncated: sorted.iter().filter(|r| r.truncated).map(|r| r.key()).collect(),
        failures,
        wall_clock,
    })
}

pub struct Outcome {
    pub report: Report,
    /// Successful runs sorted by `(instance, seed, method)`; trajectories are
    /// normalized for random problems.
    pub runs: Vec<RunResult>,
}

/// Executes every run of `exp` in parallel and aggregates them. When `out` is
/// given, per-run CSV files and `summary.json` are written there.
pub fn run_experiment(exp: &Experiment, out: Option<&Path>) -> Result<Outcome> {
    exp.settings.validate()?;
    if exp.methods.is_empty() {
        bail!("no method selected");
    }
    let started = Instant::now();
    let slots = exp.slots()?;
    let jobs: Vec<(usize, u64, Method, Arc<TargetModel>)> = slots
        .iter()
        .flat_map(|(i, s, t)| exp.methods.iter().map(move |&m| (*i, *s, m, t.clone())))
        .collect();
    let results: Vec<(usize, u64, Method, Result<RunResult>)> = jobs
        .par_iter()
        .map(|(i, s, m, t)| (*i, *s, *m, run_one(t, *m, &exp.settings, *s, *i)))
        .collect();
    let mut runs = Vec::new();
    let mut failures = Vec::new();
    for (instance, seed, method, r) in results {
        match r {
            Ok(run) => runs.push(run),
            Err(e) => failures.push(RunFailure {
                instance,
                seed,
                method,
                error: format!("{e:#}"),
            }),
        }
    }
    runs.sort_by_key(|r| r.key());
    if let Some(dir) = out {
        write_runs(dir, exp, &runs, &slots)?;
    }
    let best_kl = if exp.is_relative() {
        normalize_by_instance(&mut runs)?
    } else {
        Vec::new()
    };
    let report = aggregate(exp, &runs, failures, best_kl, started.elapsed().as_secs_f64())?;
    if let Some(dir) = out {
        let json = serde_json::to_string_pretty(&report)?;
        std::fs::write(dir.join("summary.json"), json + "\n").with_context(|| format!("writing summary in {}", dir.display()))?;
    }
    Ok(Outcome { report, runs })
}

/// File name of a run's CSV inside the output directory.
pub fn run_file_name(exp: &Experiment, r: &RunResult) -> String {
    if exp.is_relative() {
        format!("{}_instance{}_seed{}.csv", r.method, r.instance, r.seed)
    } else {
        format!("{}_seed{}.csv", r.method, r.seed)
    }
}

fn write_runs(dir: &Path, exp: &Experiment, runs: &[RunResult], slots: &[(usize, u64, Arc<TargetModel>)]) -> Result<()> {
    std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    for r in runs {
        let path = dir.join(run_file_name(exp, r));
        std::fs::write(&path, &r.csv).with_context(|| format!("writing {}", path.display()))?;
    }
    match &exp.problem {
        Problem::Random { .. } => {
            for (i, _, t) in slots {
                std::fs::write(dir.join(format!("target_instance{i}.txt")), format_target(t))?;
            }
        }
        Problem::Fixed { target, .. } => std::fs::write(dir.join("target.txt"), format_target(target))?,
    }
    Ok(())
}
