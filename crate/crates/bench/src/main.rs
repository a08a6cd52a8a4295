use std::collections::BTreeMap;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use gausscbo_bench::config::{load_file, resolve, ConfigError, Resolved};
use gausscbo_bench::experiment::{run_experiment, run_one, Experiment, Method, Report, Settings};
use gausscbo_bench::targets::{load_target, RandomGmmSpec, PRESETS};
use gausscbo_bench::validate;
use serde::Serialize;

#[derive(Parser)]
#[command(name = "gausscbo", version, about = "Consensus-based optimization over Gaussian measures")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// One method on one target with one seed; writes a trajectory CSV.
    Run(Common),
    /// CBO against the gradient flow on the 2-d targets A-D.
    Bench2d(Common),
    /// CBO against the gradient flow on random 10-d mixtures, relative KL.
    Bench10d {
        #[command(flatten)]
        common: Common,
        /// Full scale: 20 instances and horizon 75 instead of 5 and 30.
        #[arg(long)]
        full: bool,
    },
    /// CBO sensitivity to one parameter on the 2-d targets.
    Sweep {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum)]
        param: SweepParam,
        /// Comma-separated values; defaults depend on the parameter.
        #[arg(long, value_delimiter = ',')]
        values: Vec<f64>,
    },
    /// Runs the built-in invariant checks.
    Validate,
}

#[derive(Clone, Copy, Debug, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
enum SweepParam {
    Sigma,
    Particles,
    RebaseEvery,
}

#[derive(Args, Clone, Default)]
struct Common {
    /// key=value file; flags take precedence over its entries.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Preset A-D or a target file.
    #[arg(long)]
    target: Option<String>,
    /// cbo, gf or both.
    #[arg(long)]
    method: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    /// Number of seeds (instances for bench10d).
    #[arg(long)]
    seeds: Option<usize>,
    #[arg(long)]
    dt: Option<f64>,
    #[arg(long)]
    sigma: Option<f64>,
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    particles: Option<usize>,
    #[arg(long)]
    steps: Option<usize>,
    /// Time between reference updates, 0 to keep the reference fixed.
    #[arg(long)]
    rebase_every: Option<f64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

impl Common {
    /// File entries overlaid with explicit flags.
    fn key_values(&self) -> Result<BTreeMap<String, String>, ConfigError> {
        let mut kv = match &self.config {
            Some(p) => load_file(p)?,
            None => BTreeMap::new(),
        };
        let mut set = |k: &str, v: Option<String>| {
            if let Some(v) = v {
                kv.insert(k.to_string(), v);
            }
        };
        set("target", self.target.clone());
        set("method", self.method.clone());
        set("seed", self.seed.map(|v| v.to_string()));
        set("seeds", self.seeds.map(|v| v.to_string()));
        set("dt", self.dt.map(|v| v.to_string()));
        set("sigma", self.sigma.map(|v| v.to_string()));
        set("lambda", self.lambda.map(|v| v.to_string()));
        set("alpha", self.alpha.map(|v| v.to_string()));
        set("particles", self.particles.map(|v| v.to_string()));
        set("steps", self.steps.map(|v| v.to_string()));
        set("rebase_every", self.rebase_every.map(|v| v.to_string()));
        set("out", self.out.as_ref().map(|p| p.display().to_string()));
        Ok(kv)
    }
}

fn print_report(label: &str, report: &Report) {
    for (method, f) in &report.final_values {
        println!(
            "{label:<12} {method:<4} final median {:.6}  IQR [{:.6}, {:.6}]",
            f.median, f.q25, f.q75
        );
    }
    for f in &report.failures {
        eprintln!("{label}: {} seed {} failed: {}", f.method, f.seed, f.error);
    }
    if !report.truncated.is_empty() {
        eprintln!("{label}: {} gradient-flow runs stopped early", report.truncated.len());
    }
}

fn cmd_run(c: &Common) -> Result<()> {
    let kv = c.key_values()?;
    let r = resolve(Resolved::default(), &kv)?;
    let [method] = r.methods[..] else {
        return Err(ConfigError("run takes a single method".into()).into());
    };
    let target = load_target(&r.target).map_err(|e| ConfigError(format!("{e:#}")))?;
    let run = run_one(&std::sync::Arc::new(target), method, &r.settings, r.seed, 0)?;
    match &r.out {
        Some(path) => {
            if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
                std::fs::create_dir_all(dir)?;
            }
            std::fs::write(path, &run.csv).with_context(|| format!("writing {}", path.display()))?;
            println!("{} seed {} final KL {:.6} -> {}", method, r.seed, run.final_kl(), path.display());
        }
        None => std::io::stdout().write_all(run.csv.as_bytes())?,
    }
    Ok(())
}

/// Targets named by `target`, or all presets when it was left at its default.
fn targets_for(c: &Common, kv: &BTreeMap<String, String>) -> Vec<String> {
    match kv.get("target") {
        Some(t) if c.target.is_some() || c.config.is_some() => vec![t.clone()],
        _ => PRESETS.iter().map(|s| s.to_string()).collect(),
    }
}

/// Target C runs at half the step size for the same horizon.
fn settings_for(target: &str, base: &Settings, dt_given: bool) -> Settings {
    let mut s = base.clone();
    if target.eq_ignore_ascii_case("C") && !dt_given {
        let horizon = s.horizon();
        s.dt = base.dt / 2.0;
        s.steps = (horizon / s.dt).round() as usize;
    }
    s
}

fn cmd_bench2d(c: &Common) -> Result<()> {
    let kv = c.key_values()?;
    let r = resolve(Resolved::default(), &kv)?;
    let out = r.out.clone().unwrap_or_else(|| PathBuf::from("results/bench2d"));
    for name in targets_for(c, &kv) {
        let target = load_target(&name).map_err(|e| ConfigError(format!("{e:#}")))?;
        let settings = settings_for(&name, &r.settings, kv.contains_key("dt"));
        let exp = Experiment::fixed(&name, target, r.methods.clone(), settings, r.seed, r.seeds);
        let outcome = run_experiment(&exp, Some(&out.join(&name)))?;
        print_report(&name, &outcome.report);
    }
    println!("results in {}", out.display());
    Ok(())
}

fn cmd_bench10d(c: &Common, full: bool) -> Result<()> {
    let mut kv = c.key_values()?;
    let full = full || kv.get("full").is_some_and(|v| v == "true");
    kv.remove("full");
    let horizon = if full { 75.0 } else { 30.0 };
    let defaults = Resolved {
        seeds: if full { 20 } else { 5 },
        settings: Settings {
            sigma: 2.5,
            particles: 100,
            steps: (horizon / 0.1_f64).round() as usize,
            init_half_width: 1.0,
            ..Settings::default()
        },
        ..Resolved::default()
    };
    let mut r = resolve(defaults, &kv)?;
    if kv.contains_key("dt") && !kv.contains_key("steps") {
        r.settings.steps = (horizon / r.settings.dt).round() as usize;
    }
    let out = r.out.clone().unwrap_or_else(|| PathBuf::from("results/bench10d"));
    let exp = Experiment::random(RandomGmmSpec::default(), r.seeds, r.methods.clone(), r.settings.clone(), r.seed);
    let outcome = run_experiment(&exp, Some(&out))?;
    print_report("d=10 RelKL", &outcome.report);
    println!("results in {}", out.display());
    Ok(())
}

fn default_values(param: SweepParam) -> Vec<f64> {
    match param {
        SweepParam::Sigma => vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0],
        SweepParam::Particles => vec![4.0, 8.0, 16.0, 32.0, 64.0],
        SweepParam::RebaseEvery => vec![0.1, 0.2, 0.4, 0.8, 1.6, 3.2, 6.4, 12.8],
    }
}

#[derive(Serialize)]
struct SweepSummary<'a> {
    param: SweepParam,
    target: &'a str,
    values: &'a [f64],
    final_median: Vec<f64>,
    final_q25: Vec<f64>,
    final_q75: Vec<f64>,
}

fn cmd_sweep(c: &Common, param: SweepParam, values: &[f64]) -> Result<()> {
    let mut kv = c.key_values()?;
    kv.entry("method".into()).or_insert_with(|| "cbo".into());
    let r = resolve(Resolved::default(), &kv)?;
    let values = if values.is_empty() { default_values(param) } else { values.to_vec() };
    let out = r.out.clone().unwrap_or_else(|| PathBuf::from("results/sweep"));
    for name in targets_for(c, &kv) {
        let target = load_target(&name).map_err(|e| ConfigError(format!("{e:#}")))?;
        let mut summary = SweepSummary {
            param,
            target: &name,
            values: &values,
            final_median: Vec::new(),
            final_q25: Vec::new(),
            final_q75: Vec::new(),
        };
        for &v in &values {
            let mut s = settings_for(&name, &r.settings, kv.contains_key("dt"));
            let label = match param {
                SweepParam::Sigma => {
                    s.sigma = v;
                    format!("sigma={v}")
                }
                SweepParam::Particles => {
                    if v < 1.0 || v.fract() != 0.0 {
                        return Err(ConfigError(format!("particle count {v} is not a positive integer")).into());
                    }
                    s.particles = v as usize;
                    format!("particles={v}")
                }
                SweepParam::RebaseEvery => {
                    s.rebase_every = v;
                    format!("rebase_every={v}")
                }
            };
            s.validate().map_err(|e| ConfigError(format!("{e:#}")))?;
            let exp = Experiment::fixed(&name, target.clone(), vec![Method::Cbo], s, r.seed, r.seeds);
            let outcome = run_experiment(&exp, Some(&out.join(&name).join(&label)))?;
            let f = &outcome.report.final_values["cbo"];
            summary.final_median.push(f.median);
            summary.final_q25.push(f.q25);
            summary.final_q75.push(f.q75);
            println!("{name} {label:<20} final median {:.6}  IQR [{:.6}, {:.6}]", f.median, f.q25, f.q75);
        }
        write_json(&out.join(&name).join("sweep.json"), &summary)?;
    }
    Ok(())
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<()> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir)?;
    }
    std::fs::write(path, serde_json::to_string_pretty(value)? + "\n").with_context(|| format!("writing {}", path.display()))
}

fn cmd_validate() -> Result<()> {
    let checks = validate::run_all();
    let failed = checks.iter().filter(|c| !c.passed).count();
    for c in &checks {
        println!("{} {:<36} {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
    }
    if failed > 0 {
        bail!("{failed} of {} checks failed", checks.len());
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Run(c) => cmd_run(c),
        Command::Bench2d(c) => cmd_bench2d(c),
        Command::Bench10d { common, full } => cmd_bench10d(common, *full),
        Command::Sweep { common, param, values } => cmd_sweep(common, *param, values),
        Command::Validate => cmd_validate(),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            if e.downcast_ref::<ConfigError>().is_some() {
                ExitCode::from(2)
            } else {
                ExitCode::from(1)
            }
        }
    }
}
