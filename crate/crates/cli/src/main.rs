//! Batch experiment driver: subcommand dispatch, reproducible seeds, and
//! tabular artifacts with manifests.
//!
//! Exit codes: 0 success, 1 numerical failure, 2 usage error, 3 inconclusive.

mod config;
mod experiments;
mod output;

use clap::{Parser, Subcommand};
use std::path::PathBuf;
use std::process::ExitCode;

use config::{apply_file_values, parse_config_file, validate, RunConfig};
use couette2d::Error as CoreError;
use experiments::SweepOverrides;
use output::RunOutput;

#[derive(Parser)]
#[command(
    name = "couette2d",
    version,
    about = "Spectral experiments for perturbed Couette flow in a channel",
    long_about = None
)]
struct Cli {
    /// Key-value config file; flags override file values
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Viscosity, in (0, 1)
    #[arg(long, global = true)]
    nu: Option<f64>,
    /// Wall-normal node count (even, >= 8; >= 32 for operator work)
    #[arg(long, global = true)]
    n: Option<usize>,
    /// Number of streamwise Fourier modes per sign
    #[arg(long = "K", global = true)]
    kmodes: Option<usize>,
    /// Periodic box length (>= 50)
    #[arg(long = "Lx", global = true)]
    lx: Option<f64>,
    /// Sobolev exponent m in (1, inf)
    #[arg(long, global = true)]
    m: Option<f64>,
    /// Low-frequency exponent in (0, 1/12)
    #[arg(long, global = true)]
    eps: Option<f64>,
    /// Perturbation amplitude in theorem-norm units (overrides eps0 scaling)
    #[arg(long = "A", global = true)]
    amplitude: Option<f64>,
    /// Amplitude prefactor of the nu^(1/2) scaling
    #[arg(long, global = true)]
    eps0: Option<f64>,
    /// Wavenumber for single-mode experiments
    #[arg(long, global = true)]
    k: Option<f64>,
    /// Time step (default: resolves the advective phase)
    #[arg(long, global = true)]
    dt: Option<f64>,
    /// Horizon (default: experiment-specific)
    #[arg(long = "t-end", global = true)]
    t_end: Option<f64>,
    /// RNG seed; fixed seed gives byte-identical outputs
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output root (default: $COUETTE2D_OUT or the current directory)
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads (default: all cores)
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    experiment: Experiment,
}

#[derive(Subcommand, Clone, Copy)]
enum Experiment {
    /// Singular-operator norm sweep over wavenumbers
    VerifyOperator,
    /// One-mode linear evolution with the Lyapunov residual
    LinearRun,
    /// Closed-form damping envelopes of the free-space solution
    KelvinCheck,
    /// Nonlinear solver run with global diagnostics
    NonlinearRun,
    /// Amplitude bisection across viscosities
    ThresholdSweep,
    /// Empirical inequality ratio report
    Inequalities,
    /// Grid-search calibration of the Lyapunov constants
    Calibrate,
}

impl Experiment {
    fn name(self) -> &'static str {
        match self {
            Experiment::VerifyOperator => "verify-operator",
            Experiment::LinearRun => "linear-run",
            Experiment::KelvinCheck => "kelvin-check",
            Experiment::NonlinearRun => "nonlinear-run",
            Experiment::ThresholdSweep => "threshold-sweep",
            Experiment::Inequalities => "inequalities",
            Experiment::Calibrate => "calibrate",
        }
    }
}

fn resolve_config(cli: &Cli) -> Result<RunConfig, config::ConfigError> {
    let mut cfg = RunConfig::default();
    cfg.experiment = cli.experiment.name().to_string();
    if let Some(path) = &cli.config {
        let map = parse_config_file(path)?;
        apply_file_values(&mut cfg, &map)?;
    }
    // flags win over file values
    if let Some(v) = cli.nu {
        cfg.nu = v;
    }
    if let Some(v) = cli.n {
        cfg.n = v;
    }
    if let Some(v) = cli.kmodes {
        cfg.kmodes = v;
    }
    if let Some(v) = cli.lx {
        cfg.lx = v;
    }
    if let Some(v) = cli.m {
        cfg.m = v;
    }
    if let Some(v) = cli.eps {
        cfg.eps = v;
    }
    if let Some(v) = cli.amplitude {
        cfg.amplitude = Some(v);
    }
    if let Some(v) = cli.eps0 {
        cfg.eps0 = v;
    }
    if let Some(v) = cli.k {
        cfg.k = v;
    }
    if let Some(v) = cli.dt {
        cfg.dt = Some(v);
    }
    if let Some(v) = cli.t_end {
        cfg.t_end = Some(v);
    }
    if let Some(v) = cli.seed {
        cfg.seed = v;
    }
    if let Some(v) = &cli.out {
        cfg.out = v.clone();
    }
    if let Some(v) = cli.threads {
        cfg.threads = Some(v);
    }
    validate(&cfg)?;
    Ok(cfg)
}

fn run(cli: &Cli, cfg: &RunConfig) -> Result<(), CoreError> {
    let mut out = RunOutput::create(cfg)
        .map_err(|e| CoreError::NumericalFailure(format!("cannot create output dir: {e}")))?;
    let mut calibrated = None;
    let result = match cli.experiment {
        Experiment::VerifyOperator => experiments::verify_operator(cfg, &mut out),
        Experiment::LinearRun => experiments::linear_run(cfg, &mut out),
        Experiment::KelvinCheck => experiments::kelvin_check(cfg, &mut out),
        Experiment::NonlinearRun => experiments::nonlinear_run(cfg, &mut out),
        Experiment::ThresholdSweep => {
            let ov = SweepOverrides { n: cli.n, kmodes: cli.kmodes, lx: cli.lx, nu: cli.nu };
            experiments::threshold_sweep(cfg, &ov, &mut out)
        }
        Experiment::Inequalities => experiments::inequalities(cfg, &mut out),
        Experiment::Calibrate => match experiments::calibrate(cfg, &mut out) {
            Ok(constants) => {
                calibrated = Some(constants);
                Ok(())
            }
            Err(e) => Err(e),
        },
    };
    if result.is_err() {
        out.partial = true;
        // failure record for machine consumption
        let _ = out.write_json(
            "failure.json",
            &serde_json::json!({
                "error": result.as_ref().err().map(|e| e.to_string()),
            }),
        );
    }
    out.finish(cfg, calibrated)
        .map_err(|e| CoreError::NumericalFailure(format!("manifest write failed: {e}")))?;
    result
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let cfg = match resolve_config(&cli) {
        Ok(cfg) => cfg,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    if let Some(threads) = cfg.threads {
        let _ = rayon::ThreadPoolBuilder::new().num_threads(threads).build_global();
    }
    match run(&cli, &cfg) {
        Ok(()) => ExitCode::SUCCESS,
        Err(CoreError::Inconclusive(msg)) => {
            eprintln!("inconclusive: {msg}");
            ExitCode::from(3)
        }
        Err(CoreError::InvalidConfig(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
