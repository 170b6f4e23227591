//! Run configuration: defaults, key-value config files, flag overrides, and
//! range validation with named constraints.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::Serialize;

/// Fully resolved configuration of one experiment run.
#[derive(Debug, Clone, Serialize)]
pub struct RunConfig {
    pub experiment: String,
    pub n: usize,
    pub kmodes: usize,
    pub lx: f64,
    pub nu: f64,
    pub m: f64,
    pub eps: f64,
    /// perturbation amplitude in theorem-norm units; `eps0` scales it as
    /// `eps0 * sqrt(nu)` when `amplitude` is not given directly
    pub amplitude: Option<f64>,
    pub eps0: f64,
    pub k: f64,
    pub dt: Option<f64>,
    pub t_end: Option<f64>,
    pub seed: u64,
    pub out: PathBuf,
    pub threads: Option<usize>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            experiment: String::new(),
            n: 64,
            kmodes: 32,
            lx: 100.0,
            nu: 1e-3,
            m: 2.0,
            eps: 0.08,
            amplitude: None,
            eps0: 0.01,
            k: 1.0,
            dt: None,
            t_end: None,
            seed: 1,
            out: default_out_root(),
            threads: None,
        }
    }
}

/// Output root: `--out`, else the `COUETTE2D_OUT` environment variable, else
/// the current directory.
pub fn default_out_root() -> PathBuf {
    std::env::var_os("COUETTE2D_OUT").map(PathBuf::from).unwrap_or_else(|| PathBuf::from("."))
}

#[derive(Debug)]
pub struct ConfigError(pub String);

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl std::error::Error for ConfigError {}

/// Parses a `key = value` config file (one pair per line, `#` comments).
/// Unknown keys are rejected by name.
pub fn parse_config_file(path: &Path) -> Result<BTreeMap<String, String>, ConfigError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| ConfigError(format!("cannot read config {}: {e}", path.display())))?;
    let mut map = BTreeMap::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(ConfigError(format!(
                "config line {} is not `key = value`: {raw:?}",
                lineno + 1
            )));
        };
        map.insert(key.trim().to_string(), value.trim().to_string());
    }
    Ok(map)
}

const KNOWN_KEYS: &[&str] = &[
    "n", "K", "Lx", "nu", "m", "eps", "A", "eps0", "k", "dt", "t_end", "seed", "out", "threads",
];

/// Applies file values onto the defaults; flags are applied afterwards by the
/// caller so they win.
pub fn apply_file_values(
    cfg: &mut RunConfig,
    map: &BTreeMap<String, String>,
) -> Result<(), ConfigError> {
    for (key, value) in map {
        if !KNOWN_KEYS.contains(&key.as_str()) {
            return Err(ConfigError(format!(
                "unknown config key {key:?} (known: {})",
                KNOWN_KEYS.join(", ")
            )));
        }
        let parse_f = || {
            value
                .parse::<f64>()
                .map_err(|_| ConfigError(format!("key {key}: {value:?} is not a number")))
        };
        match key.as_str() {
            "n" => cfg.n = parse_usize(key, value)?,
            "K" => cfg.kmodes = parse_usize(key, value)?,
            "Lx" => cfg.lx = parse_f()?,
            "nu" => cfg.nu = parse_f()?,
            "m" => cfg.m = parse_f()?,
            "eps" => cfg.eps = parse_f()?,
            "A" => cfg.amplitude = Some(parse_f()?),
            "eps0" => cfg.eps0 = parse_f()?,
            "k" => cfg.k = parse_f()?,
            "dt" => cfg.dt = Some(parse_f()?),
            "t_end" => cfg.t_end = Some(parse_f()?),
            "seed" => cfg.seed = parse_usize(key, value)? as u64,
            "out" => cfg.out = PathBuf::from(value),
            "threads" => cfg.threads = Some(parse_usize(key, value)?),
            _ => unreachable!(),
        }
    }
    Ok(())
}

fn parse_usize(key: &str, value: &str) -> Result<usize, ConfigError> {
    value
        .parse::<usize>()
        .map_err(|_| ConfigError(format!("key {key}: {value:?} is not a nonnegative integer")))
}

/// Validates every parameter against its documented range; messages name the
/// violated constraint.
pub fn validate(cfg: &RunConfig) -> Result<(), ConfigError> {
    if cfg.n < 8 || cfg.n % 2 != 0 {
        return Err(ConfigError(format!("n must be even and >= 8, got {}", cfg.n)));
    }
    if matches!(cfg.experiment.as_str(), "verify-operator" | "calibrate") && cfg.n < 32 {
        return Err(ConfigError(format!(
            "n must be >= 32 for operator work, got {}",
            cfg.n
        )));
    }
    if cfg.kmodes == 0 {
        return Err(ConfigError("K must be positive".into()));
    }
    if cfg.lx < 50.0 {
        return Err(ConfigError(format!("Lx must be >= 50, got {}", cfg.lx)));
    }
    if !(cfg.nu > 0.0 && cfg.nu < 1.0) {
        return Err(ConfigError(format!("nu must lie in (0, 1), got {}", cfg.nu)));
    }
    if !(cfg.m > 1.0) {
        return Err(ConfigError(format!("m must lie in (1, inf), got {}", cfg.m)));
    }
    if !(cfg.eps > 0.0 && cfg.eps < 1.0 / 12.0) {
        return Err(ConfigError(format!(
            "\u{3b5} must lie in (0, 1/12), got {}",
            cfg.eps
        )));
    }
    if let Some(a) = cfg.amplitude {
        if !(a >= 0.0 && a.is_finite()) {
            return Err(ConfigError(format!("A must be finite and >= 0, got {a}")));
        }
    }
    if !(cfg.eps0 >= 0.0 && cfg.eps0.is_finite()) {
        return Err(ConfigError(format!("eps0 must be finite and >= 0, got {}", cfg.eps0)));
    }
    if cfg.k == 0.0 || !cfg.k.is_finite() {
        return Err(ConfigError(format!("k must be finite and nonzero, got {}", cfg.k)));
    }
    if let Some(dt) = cfg.dt {
        if !(dt > 0.0) {
            return Err(ConfigError(format!("dt must be positive, got {dt}")));
        }
    }
    if let Some(t) = cfg.t_end {
        if !(t >= 0.0) {
            return Err(ConfigError(format!("t_end must be >= 0, got {t}")));
        }
    }
    Ok(())
}

/// Amplitude resolution: explicit `A` wins, else the theorem scaling
/// `eps0 * nu^(1/2)`.
pub fn amplitude(cfg: &RunConfig) -> f64 {
    cfg.amplitude.unwrap_or(cfg.eps0 * cfg.nu.sqrt())
}
