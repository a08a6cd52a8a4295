//! Flat `key=value` configuration. A file supplies values, command-line flags
//! replace individual keys, and [`resolve`] parses the result on top of a
//! command's defaults.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::experiment::{parse_methods, Method, Settings};
use crate::targets::parse_key_values;

/// Bad configuration: unknown key, unparsable value, invalid combination.
#[derive(Debug)]
pub struct ConfigError(pub String);

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for ConfigError {}

#[derive(Clone, Debug, PartialEq)]
pub struct Resolved {
    pub target: String,
    pub methods: Vec<Method>,
    pub seed: u64,
    pub seeds: usize,
    pub settings: Settings,
    pub out: Option<PathBuf>,
    pub full: bool,
}

impl Default for Resolved {
    fn default() -> Self {
        Resolved {
            target: "A".to_string(),
            methods: vec![Method::Cbo, Method::Gf],
            seed: 0,
            seeds: 20,
            settings: Settings::default(),
            out: None,
            full: false,
        }
    }
}

/// Reads a configuration file. Dashes in keys are accepted as underscores.
pub fn load_file(path: &Path) -> Result<BTreeMap<String, String>, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|e| ConfigError(format!("cannot read {}: {e}", path.display())))?;
    let kv = parse_key_values(&text).map_err(|e| ConfigError(format!("{}: {e:#}", path.display())))?;
    Ok(kv.into_iter().map(|(k, v)| (k.replace('-', "_"), v)).collect())
}

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T, ConfigError>
where
    T::Err: fmt::Display,
{
    value
        .parse()
        .map_err(|e| ConfigError(format!("invalid value '{value}' for {key}: {e}")))
}

/// Applies `kv` on top of `base` and validates the result.
pub fn resolve(mut base: Resolved, kv: &BTreeMap<String, String>) -> Result<Resolved, ConfigError> {
    for (key, value) in kv {
        let s = &mut base.settings;
        match key.as_str() {
            "target" => base.target = value.clone(),
            "method" => base.methods = parse_methods(value).map_err(|e| ConfigError(format!("{e:#}")))?,
            "seed" => base.seed = parse(key, value)?,
            "seeds" => base.seeds = parse(key, value)?,
            "dt" => s.dt = parse(key, value)?,
            "steps" => s.steps = parse(key, value)?,
            "sigma" => s.sigma = parse(key, value)?,
            "lambda" => s.lambda = parse(key, value)?,
            "alpha" => s.alpha = parse(key, value)?,
            "particles" => s.particles = parse(key, value)?,
            "rebase_every" => s.rebase_every = parse(key, value)?,
            "anisotropic" => s.anisotropic = parse(key, value)?,
            "jitter" => s.jitter = parse(key, value)?,
            "init_half_width" => s.init_half_width = parse(key, value)?,
            "out" => base.out = Some(PathBuf::from(value)),
            "full" => base.full = parse(key, value)?,
            _ => return Err(ConfigError(format!("unknown configuration key '{key}'"))),
        }
    }
    if base.seeds == 0 {
        return Err(ConfigError("seeds must be at least 1".into()));
    }
    base.settings
        .validate()
        .map_err(|e| ConfigError(format!("{e:#}")))?;
    Ok(base)
}
