//! The experiment runners behind each subcommand: they assemble the inputs,
//! call into the library, and write CSV/JSON artifacts plus the manifest.

use couette2d::cheb::build_grid;
use couette2d::diagnostics::{
    bootstrap_monitor, inequality_harness, nonlinear_terms, DiagRunner, JCache,
};
use couette2d::jop::{adjoint_defect, assemble_j, commutator_norm, operator_norm};
use couette2d::linear::{
    calibrate_constants, default_dt, enhanced_dissipation_check, evolve_linear,
    inviscid_damping_check, lyapunov_monitor, random_smooth_field,
};
use couette2d::nls2d::{init_perturbation, write_checkpoint, FlowState, InitConfig, Nls2dSolver};
use couette2d::threshold::{bisect_threshold, scaling_fit, ProbeConfig, SweepResult, Verdict};
use couette2d::weights::WeightSet;
use couette2d::Error as CoreError;

use crate::config::{amplitude, RunConfig};
use crate::output::RunOutput;

pub type ExpResult = Result<(), CoreError>;

fn io_err(e: std::io::Error) -> CoreError {
    CoreError::NumericalFailure(format!("io failure: {e}"))
}

fn weight_set(cfg: &RunConfig) -> Result<WeightSet, CoreError> {
    let mut ws = WeightSet::new(cfg.nu)?;
    ws.m = cfg.m;
    ws.eps = cfg.eps;
    ws.validate()?;
    Ok(ws)
}

/// `verify-operator`: k-sweep of the singular-operator norms at the
/// configured grid size.
pub fn verify_operator(cfg: &RunConfig, out: &mut RunOutput) -> ExpResult {
    let grid = build_grid(cfg.n)?;
    let mut rows = Vec::new();
    for i in 0..25 {
        let k = 10f64.powf(-3.0 + 6.0 * i as f64 / 24.0);
        let j = assemble_j(&grid, k)?;
        rows.push(vec![
            k,
            cfg.n as f64,
            operator_norm(&j, &grid),
            commutator_norm(&j, &grid),
            adjoint_defect(&j, &grid),
        ]);
    }
    out.write_csv("operator_sweep.csv", "k,n,norm,commutator_ratio,adjoint_defect", &rows)
        .map_err(io_err)?;
    Ok(())
}

/// `linear-run`: one-mode evolution with the Lyapunov residual series.
pub fn linear_run(cfg: &RunConfig, out: &mut RunOutput) -> ExpResult {
    let grid = build_grid(cfg.n)?;
    let ws = weight_set(cfg)?;
    let jop = assemble_j(&grid, cfg.k)?;
    let om0 = random_smooth_field(&grid, cfg.seed);
    let dt = cfg.dt.unwrap_or_else(|| default_dt(cfg.k));
    let t_end = cfg.t_end.unwrap_or(20.0);
    let traj = evolve_linear(&grid, &jop, &ws, cfg.k, cfg.nu, &om0, t_end, dt)?;
    let report = lyapunov_monitor(&traj, &ws)?;
    let mut rows = Vec::with_capacity(traj.times.len());
    for (i, &t) in traj.times.iter().enumerate() {
        let c = &traj.components[i];
        // residual defined at interior times; endpoints carry 0
        let res = if i >= 1 && i + 1 < traj.times.len() { report.residuals[i - 1] } else { 0.0 };
        rows.push(vec![
            t,
            traj.energies[i],
            c.dis[0],
            c.dis[1],
            c.dis[2],
            c.dis[3],
            c.dis[4],
            res,
        ]);
    }
    out.write_csv("trajectory.csv", "t,E,Dis1,Dis2,Dis3,Dis4,Dis5,residual", &rows)
        .map_err(io_err)?;
    out.write_json(
        "lyapunov.json",
        &serde_json::json!({
            "max_residual": report.max_residual,
            "max_dissipation": report.max_dissipation,
            "slack": 1e-2 * report.max_dissipation,
            "feasible": report.feasible(),
        }),
    )
    .map_err(io_err)?;
    Ok(())
}

/// `kelvin-check`: closed-form damping envelopes on the default grids.
pub fn kelvin_check(_cfg: &RunConfig, out: &mut RunOutput) -> ExpResult {
    let ks = [0.5, 1.0, 2.0, 4.0];
    let nus = [1e-2, 1e-3, 1e-4];
    let enhanced = enhanced_dissipation_check(&ks, &nus, 60)?;
    let coarse = inviscid_damping_check(&ks, &nus, 40)?;
    let fine = inviscid_damping_check(&ks, &nus, 80)?;
    out.write_json(
        "kelvin_report.json",
        &serde_json::json!({
            "enhanced_sup_ratio": enhanced.sup_ratio,
            "enhanced_bound": (4.0f64 / 3.0).exp(),
            "inviscid_sup_ratio": coarse.sup_ratio,
            "inviscid_sup_ratio_refined": fine.sup_ratio,
            "refinement_drift": (fine.sup_ratio - coarse.sup_ratio).abs() / fine.sup_ratio,
        }),
    )
    .map_err(io_err)?;
    Ok(())
}

/// `nonlinear-run`: full solver run with the diagnostic row schema and a
/// final checkpoint.
pub fn nonlinear_run(cfg: &RunConfig, out: &mut RunOutput) -> ExpResult {
    let ws = weight_set(cfg)?;
    let kmax_phys = 2.0 * std::f64::consts::PI * cfg.kmodes as f64 / cfg.lx;
    let dt = cfg.dt.unwrap_or_else(|| (0.2 / kmax_phys).min(0.01));
    let solver = Nls2dSolver::new(cfg.n, cfg.kmodes, cfg.lx, cfg.nu, dt)?;
    let jcache = JCache::build(&solver.grid, cfg.lx, cfg.kmodes)?;
    let a = amplitude(cfg);
    let init = InitConfig { amplitude: a, seed: cfg.seed, ..Default::default() };
    let mut state = init_perturbation(&solver.grid, &ws, cfg.lx, cfg.kmodes, &init)?;
    let t_end = cfg.t_end.unwrap_or_else(|| 3.0 * cfg.nu.powf(-1.0 / 3.0));
    let nsteps = (t_end / dt).ceil() as usize;
    let record_every = 20usize;
    let mut runner = DiagRunner::new(ws.clone());
    let nl0 = solver.nonlinear_term(&state)?;
    let n_parts = nonlinear_terms(&solver.grid, &state, &ws, &jcache, &nl0)?;
    runner.record(&solver.grid, &state, &jcache, n_parts)?;
    let mut prev = None;
    for s in 0..nsteps {
        solver.step(&mut state, &mut prev)?;
        if (s + 1) % record_every == 0 || s + 1 == nsteps {
            let nl = solver.nonlinear_term(&state)?;
            let n_parts = nonlinear_terms(&solver.grid, &state, &ws, &jcache, &nl)?;
            runner.record(&solver.grid, &state, &jcache, n_parts)?;
        }
    }
    let rows: Vec<Vec<f64>> = runner
        .reports
        .iter()
        .map(|r| {
            vec![
                r.t,
                r.e_global,
                r.d_global,
                r.d_parts[0],
                r.d_parts[1],
                r.d_parts[2],
                r.d_parts[3],
                r.d_parts[4],
                r.n_parts[0],
                r.n_parts[1],
                r.n_parts[2],
                r.e_total,
                r.theorem_norm,
                r.d4_time_integral,
            ]
        })
        .collect();
    out.write_csv(
        "diagnostics.csv",
        "t,E,D,D1,D2,D3,D4,D5,n1,n2,n3,E_total,theorem_norm,intD4",
        &rows,
    )
    .map_err(io_err)?;
    let boot = bootstrap_monitor(&runner.reports, cfg.nu)?;
    out.write_json(
        "bootstrap.json",
        &serde_json::json!({
            "c1": boot.c1,
            "stable": boot.stable,
            "e_total_start": boot.e_total_start,
            "e_total_end": boot.e_total_end,
        }),
    )
    .map_err(io_err)?;
    let ckpt = out.dir().join("final_state.bin");
    write_checkpoint(&ckpt, &state, solver.grid.n)?;
    Ok(())
}

/// Resolution overrides for the sweep probes (the sweep default is coarser
/// than the global default so the bisection stays tractable).
pub struct SweepOverrides {
    pub n: Option<usize>,
    pub kmodes: Option<usize>,
    pub lx: Option<f64>,
    pub nu: Option<f64>,
}

/// `threshold-sweep`: bisection per viscosity plus the scaling fit.
pub fn threshold_sweep(
    cfg: &RunConfig,
    ov: &SweepOverrides,
    out: &mut RunOutput,
) -> ExpResult {
    let nus: Vec<f64> = match ov.nu {
        Some(nu) => vec![nu],
        None => vec![10f64.powf(-2.5), 1e-3, 10f64.powf(-3.5)],
    };
    let mut results: Vec<SweepResult> = Vec::new();
    let mut rows: Vec<String> = Vec::new();
    for &nu in &nus {
        let mut ws = weight_set(cfg)?;
        ws.nu = nu;
        let mut probe_cfg = ProbeConfig::with_defaults(ws);
        if let Some(n) = ov.n {
            probe_cfg.n = n;
        }
        if let Some(k) = ov.kmodes {
            probe_cfg.kmax = k;
        }
        if let Some(lx) = ov.lx {
            probe_cfg.lx = lx;
        }
        probe_cfg.seed = cfg.seed;
        probe_cfg.dt = cfg.dt;
        probe_cfg.t_end = cfg.t_end;
        let started = std::time::Instant::now();
        let sweep = bisect_threshold(nu, &probe_cfg)?;
        let elapsed = started.elapsed().as_secs_f64();
        for (a, v, peak) in &sweep.verdicts {
            rows.push(format!(
                "{:.17e},{:.17e},{},{:.17e},{:.3}",
                nu,
                a,
                match v {
                    Verdict::Stable => "stable",
                    Verdict::Unstable => "unstable",
                },
                peak,
                elapsed
            ));
        }
        results.push(sweep);
    }
    out.write_csv_raw("sweep.csv", "nu,A,verdict,peak_ratio,runtime_seconds", &rows)
        .map_err(io_err)?;
    let fit = scaling_fit(&results).ok();
    out.write_json(
        "summary.json",
        &serde_json::json!({
            "results": results
                .iter()
                .map(|r| {
                    serde_json::json!({
                        "nu": r.nu,
                        "a_star": r.a_star,
                        "no_instability_found": r.a_star.is_none(),
                        "note": r.no_instability_note,
                        "bisection_tol": r.bisection_tol,
                        "probes": r.verdicts.len(),
                    })
                })
                .collect::<Vec<_>>(),
            "gamma": fit.as_ref().map(|f| f.gamma),
            "r_squared": fit.as_ref().map(|f| f.r_squared),
            "gamma_stderr": fit.as_ref().map(|f| f.stderr),
        }),
    )
    .map_err(io_err)?;
    Ok(())
}

/// Builds the harness sample set: a synthetic random-spectrum ensemble plus
/// snapshots of stable trajectories.
pub fn harness_samples(
    solver: &Nls2dSolver,
    ws: &WeightSet,
    cfg: &RunConfig,
    ensemble: usize,
    trajectories: usize,
) -> Result<Vec<FlowState>, CoreError> {
    let mut samples = Vec::new();
    for i in 0..ensemble {
        let init = InitConfig {
            amplitude: 1.0,
            seed: cfg.seed.wrapping_add(i as u64),
            ..Default::default()
        };
        samples.push(init_perturbation(&solver.grid, ws, solver.lx, solver.kmax, &init)?);
    }
    for i in 0..trajectories {
        let init = InitConfig {
            amplitude: 0.01 * cfg.nu.sqrt(),
            seed: cfg.seed.wrapping_add(1000 + i as u64),
            ..Default::default()
        };
        let mut state = init_perturbation(&solver.grid, ws, solver.lx, solver.kmax, &init)?;
        let mut prev = None;
        let steps = (10.0 / solver.dt).ceil() as usize;
        let snap_every = steps / 5;
        for s in 0..steps {
            solver.step(&mut state, &mut prev)?;
            if (s + 1) % snap_every == 0 {
                samples.push(state.clone());
            }
        }
    }
    Ok(samples)
}

/// `inequalities`: empirical ratio report over ensemble plus trajectories.
pub fn inequalities(cfg: &RunConfig, out: &mut RunOutput) -> ExpResult {
    let ws = weight_set(cfg)?;
    let kmax_phys = 2.0 * std::f64::consts::PI * cfg.kmodes as f64 / cfg.lx;
    let dt = cfg.dt.unwrap_or_else(|| (0.2 / kmax_phys).min(0.01));
    let solver = Nls2dSolver::new(cfg.n, cfg.kmodes, cfg.lx, cfg.nu, dt)?;
    let jcache = JCache::build(&solver.grid, cfg.lx, cfg.kmodes)?;
    let samples = harness_samples(&solver, &ws, cfg, 50, 2)?;
    let reports = inequality_harness(&solver, &ws, &jcache, &samples)?;
    let rows: Vec<String> = reports
        .iter()
        .map(|r| {
            format!("{},{:.17e},{:.17e},{}", r.name, r.max_ratio, r.median_ratio, r.samples)
        })
        .collect();
    out.write_csv_raw("inequalities.csv", "name,max_ratio,median_ratio,samples", &rows)
        .map_err(io_err)?;
    Ok(())
}

/// `calibrate`: grid-search calibration over the linear ensemble; returns the
/// constants for the manifest.
pub fn calibrate(cfg: &RunConfig, out: &mut RunOutput) -> Result<serde_json::Value, CoreError> {
    let grid = build_grid(cfg.n)?;
    let base = weight_set(cfg)?;
    let nu_list = [1e-3, 1e-4];
    let k_list = [0.5, 1.0, 2.0, 4.0];
    let ws = calibrate_constants(&grid, &nu_list, &k_list, 10, cfg.seed, &base)?;
    let constants = serde_json::json!({
        "c_alpha": ws.c_alpha,
        "c_beta": ws.c_beta,
        "c_tau": ws.c_tau,
        "c0": ws.c0,
        "c": ws.c,
        "c_j_cap": ws.c_j_cap,
    });
    out.write_json("constants.json", &constants).map_err(io_err)?;
    Ok(constants)
}
