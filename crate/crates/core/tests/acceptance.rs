//! Acceptance suite: the quantitative gates of the artifact, one test per
//! criterion, each printing a single pass/fail line. Tolerances are fixed
//! here and nowhere else.

use couette2d::cheb::{build_grid, helmholtz_solve};
use couette2d::diagnostics::{
    bootstrap_monitor, inequality_harness, DiagRunner, InequalityReport, JCache,
};
use couette2d::elliptic::{apply_greens, assemble_greens};
use couette2d::jop::{adjoint_defect, assemble_j, commutator_norm, operator_norm};
use couette2d::linear::{
    calibrate_constants, efold_time, enhanced_dissipation_check, evolve_linear,
    inviscid_damping_check, kelvin_exact, least_squares_fit, lyapunov_monitor,
    random_smooth_field,
};
use couette2d::nls2d::{init_perturbation, FlowState, InitConfig, Nls2dSolver};
use couette2d::threshold::{bisect_threshold, scaling_fit, ProbeConfig};
use couette2d::weights::WeightSet;
use couette2d::ModeField;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn report(id: u32, name: &str, pass: bool, detail: &str) {
    println!("ACCEPTANCE {id} ({name}): {} [{detail}]", if pass { "PASS" } else { "FAIL" });
    assert!(pass, "criterion {id} ({name}) failed: {detail}");
}

#[test]
fn criterion_01_elliptic_consistency() {
    let grid = build_grid(64).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst: f64 = 0.0;
    for k in [0.01, 0.5, 1.0, 4.0, 20.0] {
        let gm = assemble_greens(&grid, k).unwrap();
        for _ in 0..20 {
            let f = random_smooth_field(&grid, rng.gen());
            let via_green = apply_greens(&gm, &grid, &f).unwrap();
            let via_solve = helmholtz_solve(&grid, k, &f).unwrap();
            worst = worst.max((&via_green - &via_solve).norm() / via_solve.norm());
        }
    }
    report(
        1,
        "elliptic consistency",
        worst <= 1e-5,
        &format!("max rel L2 error {worst:.3e} <= 1e-5 over k in {{0.01,0.5,1,4,20}}, n=64"),
    );
}

#[test]
fn criterion_02_operator_norm_envelope() {
    let g64 = build_grid(64).unwrap();
    let g128 = build_grid(128).unwrap();
    let mut sup = 0.0f64;
    let mut worst_drift = 0.0f64;
    for i in 0..25 {
        let k = 10f64.powf(-3.0 + 6.0 * i as f64 / 24.0);
        let n64 = operator_norm(&assemble_j(&g64, k).unwrap(), &g64);
        let n128 = operator_norm(&assemble_j(&g128, k).unwrap(), &g128);
        sup = sup.max(n128);
        worst_drift = worst_drift.max((n128 - n64).abs() / n128);
    }
    report(
        2,
        "operator norm envelope",
        sup <= 10.0 && worst_drift < 0.05,
        &format!("sup norm {sup:.4} <= 10, worst refinement drift {worst_drift:.3e} < 5%"),
    );
}

#[test]
fn criterion_03_commutator_and_adjoint() {
    let g64 = build_grid(64).unwrap();
    let g128 = build_grid(128).unwrap();
    let mut sup_ratio = 0.0f64;
    let mut worst_drift = 0.0f64;
    for i in 0..13 {
        let k = 10f64.powf(-1.0 + 3.0 * i as f64 / 12.0);
        let r64 = commutator_norm(&assemble_j(&g64, k).unwrap(), &g64);
        let r128 = commutator_norm(&assemble_j(&g128, k).unwrap(), &g128);
        sup_ratio = sup_ratio.max(r64).max(r128);
        worst_drift = worst_drift.max((r128 - r64).abs() / r128.max(1e-12));
    }
    let mut defect_ok = true;
    let mut defect_detail = String::new();
    let mut max_re_rel = 0.0f64;
    for k in [1.0, 10.0] {
        let j64 = assemble_j(&g64, k).unwrap();
        let j128 = assemble_j(&g128, k).unwrap();
        let d64 = adjoint_defect(&j64, &g64) / operator_norm(&j64, &g64);
        let d128 = adjoint_defect(&j128, &g128) / operator_norm(&j128, &g128);
        defect_ok &= d64 <= 1e-3 && d128 <= d64;
        defect_detail.push_str(&format!("k={k}: {d64:.2e}->{d128:.2e} "));
        let scale = j128.mat.iter().map(|v| v.norm()).fold(0.0f64, f64::max);
        let re = j128.mat.iter().map(|v| v.re.abs()).fold(0.0f64, f64::max);
        max_re_rel = max_re_rel.max(re / scale);
    }
    report(
        3,
        "commutator and adjoint",
        sup_ratio <= 50.0 && worst_drift < 0.10 && defect_ok && max_re_rel <= 1e-10,
        &format!(
            "sup commutator ratio {sup_ratio:.3} <= 50, drift {worst_drift:.2e} < 10%, \
             defect {defect_detail}, max Re/|J| {max_re_rel:.1e}"
        ),
    );
}

#[test]
fn criterion_04_kelvin_oracle() {
    // closed form vs RK4 along characteristics on 100 random samples
    let f = |_k: f64, xi: f64| Complex64::new((-0.3 * xi * xi).exp(), 0.1 * xi);
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let k: f64 = rng.gen_range(0.5..2.0);
        let xi: f64 = rng.gen_range(-2.0..2.0);
        let t: f64 = rng.gen_range(0.0..2.0);
        let nu: f64 = rng.gen_range(1e-4..1e-2);
        let exact = kelvin_exact(k, xi, t, nu, f).unwrap();
        let steps = 800;
        let h = t / steps as f64;
        let rate = |s: f64| {
            let z = xi + k * (t - s);
            -nu * (k * k + z * z)
        };
        let mut a = f(k, xi + k * t);
        for i in 0..steps {
            let s = i as f64 * h;
            let k1 = rate(s);
            let k2 = rate(s + 0.5 * h);
            let k4 = rate(s + h);
            let r1 = k1 * a;
            let r2 = k2 * (a + 0.5 * h * r1);
            let r3 = k2 * (a + 0.5 * h * r2);
            let r4 = k4 * (a + h * r3);
            a += (h / 6.0) * (r1 + 2.0 * r2 + 2.0 * r3 + r4);
        }
        worst = worst.max((a - exact).norm() / exact.norm().max(1e-12));
    }
    let ks = [0.5, 1.0, 2.0, 4.0];
    let nus = [1e-2, 1e-3, 1e-4];
    let enhanced = enhanced_dissipation_check(&ks, &nus, 60).unwrap();
    let bound = (4.0f64 / 3.0).exp() + 1e-6;
    let coarse = inviscid_damping_check(&ks, &nus, 40).unwrap().sup_ratio;
    let fine = inviscid_damping_check(&ks, &nus, 80).unwrap().sup_ratio;
    let drift = (fine - coarse).abs() / fine;
    report(
        4,
        "Kelvin oracle",
        worst <= 1e-8 && enhanced.sup_ratio <= bound && fine.is_finite() && drift < 0.05,
        &format!(
            "characteristics rel {worst:.2e} <= 1e-8, enhanced sup {:.6} <= {bound:.6}, \
             inviscid sup {fine:.3} (drift {drift:.2e} < 5%)",
            enhanced.sup_ratio
        ),
    );
}

#[test]
fn criterion_05_lyapunov_decay() {
    let grid = build_grid(64).unwrap();
    let base = WeightSet::new(1e-3).unwrap();
    let nu_list = [1e-3, 1e-4];
    let k_list = [0.5, 1.0, 2.0, 4.0];
    let ws = calibrate_constants(&grid, &nu_list, &k_list, 10, 2024, &base).unwrap();

    // re-verify the certified inequality on the documented ensemble through
    // the public evolve/monitor path (independent of the calibration's
    // internal bookkeeping)
    let mut worst_ratio = 0.0f64;
    let mut decay_ok = true;
    for &nu in &nu_list {
        let mut ks = k_list.to_vec();
        ks.push(nu);
        for &k in &ks {
            let jop = assemble_j(&grid, k).unwrap();
            let mut wsn = ws.clone();
            wsn.nu = nu;
            for d in 0..10u64 {
                let om0 = random_smooth_field(&grid, 2024 ^ ((d + 1) * 0x9e3779b9));
                let dt = 0.5 * couette2d::linear::default_dt(k);
                let traj = evolve_linear(&grid, &jop, &wsn, k, nu, &om0, 20.0, dt).unwrap();
                let rep = lyapunov_monitor(&traj, &wsn).unwrap();
                worst_ratio = worst_ratio.max(rep.max_residual / (1e-2 * rep.max_dissipation));
                // Groenwall consequence E(t) <= E(0) exp(-c0 lambda t (1-tol)),
                // tol = 0.1, past the one-step startup transient
                let mw = traj.mode_weights();
                let e = traj.energies_for(&wsn);
                for (i, &t) in traj.times.iter().enumerate() {
                    if t < 0.5 {
                        continue;
                    }
                    let bound = e[0] * (-wsn.c0 * mw.lambda * t * 0.9).exp();
                    if e[i] > bound * (1.0 + 1e-9) {
                        decay_ok = false;
                    }
                }
            }
        }
    }
    report(
        5,
        "Lyapunov decay",
        worst_ratio <= 1.0 && decay_ok,
        &format!(
            "calibrated (c_alpha={}, c_beta={}, c_tau={}, c0={}): residual/slack {worst_ratio:.3} \
             <= 1, exponential envelope {}",
            ws.c_alpha, ws.c_beta, ws.c_tau, ws.c0, decay_ok
        ),
    );
}

#[test]
fn criterion_06_enhanced_dissipation_scaling() {
    let nus = [1e-3, 1e-4, 1e-5];
    let mut detail = String::new();
    let mut ok = true;
    for k in [1.0, 2.0, 4.0] {
        let mut lt = Vec::new();
        let mut ln = Vec::new();
        for &nu in &nus {
            let tau = efold_time(k, nu).unwrap();
            lt.push(tau.ln());
            ln.push(nu.ln());
        }
        let (slope, _) = least_squares_fit(&ln, &lt);
        ok &= (-0.42..=-0.25).contains(&slope);
        detail.push_str(&format!("k={k}: slope {slope:.3}; "));
    }
    report(6, "enhanced dissipation scaling", ok, &format!("{detail}target [-0.42,-0.25]"));
}

#[test]
fn criterion_07_linearization_consistency() {
    // amplitude 1e-8 single-mode nonlinear run vs the linear solver at t = 1
    let n = 48;
    let kmax = 8usize;
    let lx = 50.0;
    let nu = 1e-3;
    let dt = 0.01;
    let solver = Nls2dSolver::new(n, kmax, lx, nu, dt).unwrap();
    let j0 = 3usize;
    let k0 = 2.0 * std::f64::consts::PI * j0 as f64 / lx;
    let profile = solver.grid.sample(|y| {
        let s = (std::f64::consts::PI * (y + 1.0) / 2.0).sin()
            + 0.6 * (std::f64::consts::PI * (y + 1.0)).sin();
        Complex64::new(1e-8, 0.4e-8) * Complex64::new(s, 0.0)
    });
    let mut state = FlowState::zero(lx, kmax, nu, n);
    state.modes[kmax + j0] = profile.clone();
    state.modes[kmax - j0] = profile.map(|v| v.conj());
    let mut prev = None;
    for _ in 0..100 {
        solver.step(&mut state, &mut prev).unwrap();
    }
    let ws = WeightSet::new(nu).unwrap();
    let jop = assemble_j(&solver.grid, k0).unwrap();
    let traj = evolve_linear(&solver.grid, &jop, &ws, k0, nu, &profile, 1.0, dt).unwrap();
    let linear_final = traj.states.last().unwrap();
    let nl_final = &state.modes[kmax + j0];
    let rel = (nl_final - linear_final).norm() / linear_final.norm();

    // convolution oracle on a 5-mode state
    let ws5 = WeightSet::new(nu).unwrap();
    let cfg = InitConfig {
        amplitude: 0.5,
        seed: 11,
        kmax_active: 2.0 * std::f64::consts::PI / lx * 2.5,
        p_max: 4,
    };
    let st5 = init_perturbation(&solver.grid, &ws5, lx, kmax, &cfg).unwrap();
    let nl = solver.nonlinear_term(&st5).unwrap();
    let vel = solver.velocity_from_vorticity(&st5).unwrap();
    let km = kmax as i64;
    let np = solver.grid.n + 1;
    let scale = nl.iter().flat_map(|m| m.iter()).map(|v| v.norm()).fold(0.0f64, f64::max);
    let mut conv_worst = 0.0f64;
    for jk in -km..=km {
        let mut direct = ModeField::zeros(np);
        for jl in -km..=km {
            let jr = jk - jl;
            if !(-km..=km).contains(&jr) {
                continue;
            }
            let kr = 2.0 * std::f64::consts::PI * jr as f64 / lx;
            let u1 = &vel.u1[(jl + km) as usize];
            let u2 = &vel.u2[(jl + km) as usize];
            let om = &st5.modes[(jr + km) as usize];
            let dom = couette2d::cheb::differentiate(&solver.grid, om, 1).unwrap();
            for i in 0..np {
                direct[i] -= u1[i] * Complex64::new(0.0, kr) * om[i] + u2[i] * dom[i];
            }
        }
        let got = &nl[(jk + km) as usize];
        for i in 0..np {
            conv_worst = conv_worst.max((got[i] - direct[i]).norm() / scale);
        }
    }
    report(
        7,
        "linearization consistency",
        rel <= 1e-4 && conv_worst <= 1e-10,
        &format!("nonlinear-vs-linear rel {rel:.2e} <= 1e-4, convolution defect {conv_worst:.2e} <= 1e-10"),
    );
}

#[test]
fn criterion_08_theorem_stability() {
    let eps0 = 0.01;
    let n = 64;
    let kmax = 32usize;
    let dt = 0.01;
    let mut ok = true;
    let mut detail = String::new();
    for nu in [1e-3f64, 1e-4] {
        let t_end = 3.0 * nu.powf(-1.0 / 3.0);
        let nsteps = (t_end / dt).ceil() as usize;
        let mut d4_ratios = Vec::new();
        for lx in [50.0, 100.0, 200.0] {
            let mut ws = WeightSet::new(nu).unwrap();
            ws.nu = nu;
            let solver = Nls2dSolver::new(n, kmax, lx, nu, dt).unwrap();
            let jcache = JCache::build(&solver.grid, lx, kmax).unwrap();
            let cfg = InitConfig { amplitude: eps0 * nu.sqrt(), seed: 8, ..Default::default() };
            let mut state = init_perturbation(&solver.grid, &ws, lx, kmax, &cfg).unwrap();
            let mut runner = DiagRunner::new(ws.clone());
            runner.record(&solver.grid, &state, &jcache, [0.0; 3]).unwrap();
            let mut prev = None;
            for s in 0..nsteps {
                solver.step(&mut state, &mut prev).unwrap();
                if (s + 1) % 25 == 0 || s + 1 == nsteps {
                    runner.record(&solver.grid, &state, &jcache, [0.0; 3]).unwrap();
                }
            }
            let e0 = runner.reports[0].e_global;
            let sup_e = runner.reports.iter().map(|r| r.e_global).fold(0.0f64, f64::max);
            let e_final = runner.reports.last().unwrap().e_global;
            let int_d4 = runner.reports.last().unwrap().d4_time_integral;
            let stable = sup_e <= 10.0 * e0 && e_final <= e0;
            ok &= stable;
            d4_ratios.push(int_d4 / e0);
            detail.push_str(&format!(
                "nu={nu:.0e},Lx={lx}: supE/E0={:.3}, E(T)/E0={:.3}, intD4/E0={:.3}; ",
                sup_e / e0,
                e_final / e0,
                int_d4 / e0
            ));
        }
        let cmax = d4_ratios.iter().copied().fold(f64::MIN, f64::max);
        let cmin = d4_ratios.iter().copied().fold(f64::MAX, f64::min);
        let drift = (cmax - cmin) / cmax;
        ok &= drift < 0.15;
        detail.push_str(&format!("nu={nu:.0e} D4-constant drift {drift:.3} < 0.15; "));
    }
    report(8, "theorem-scale stability", ok, &detail);
}

fn harness_at(
    n: usize,
    kmax: usize,
    seed_base: u64,
) -> (Vec<InequalityReport>, f64) {
    let lx = 100.0;
    let nu = 1e-3;
    let dt = 0.01;
    let ws = WeightSet::new(nu).unwrap();
    let solver = Nls2dSolver::new(n, kmax, lx, nu, dt).unwrap();
    let jcache = JCache::build(&solver.grid, lx, kmax).unwrap();
    let mut samples = Vec::new();
    for i in 0..50 {
        let cfg = InitConfig { amplitude: 1.0, seed: seed_base + i, ..Default::default() };
        samples.push(init_perturbation(&solver.grid, &ws, lx, kmax, &cfg).unwrap());
    }
    // two stable theorem-scale trajectories, five snapshots each
    let mut c1_worst = 0.0f64;
    for tseed in 0..2u64 {
        let cfg = InitConfig {
            amplitude: 0.01 * nu.sqrt(),
            seed: seed_base + 100 + tseed,
            ..Default::default()
        };
        let mut state = init_perturbation(&solver.grid, &ws, lx, kmax, &cfg).unwrap();
        let mut runner = DiagRunner::new(ws.clone());
        runner.record(&solver.grid, &state, &jcache, [0.0; 3]).unwrap();
        let mut prev = None;
        let steps = (10.0 / dt) as usize;
        for s in 0..steps {
            solver.step(&mut state, &mut prev).unwrap();
            if (s + 1) % 100 == 0 {
                runner.record(&solver.grid, &state, &jcache, [0.0; 3]).unwrap();
            }
            if (s + 1) % 200 == 0 {
                samples.push(state.clone());
            }
        }
        let boot = bootstrap_monitor(&runner.reports, nu).unwrap();
        assert!(boot.stable, "harness trajectory must be stable");
        c1_worst = c1_worst.max(boot.c1);
    }
    (inequality_harness(&solver, &ws, &jcache, &samples).unwrap(), c1_worst)
}

#[test]
fn criterion_09_inequality_harness() {
    let (coarse, c1_a) = harness_at(64, 32, 500);
    let (fine, c1_b) = harness_at(96, 48, 500);
    let mut ok = true;
    let mut detail = String::new();
    for (c, f) in coarse.iter().zip(&fine) {
        let finite = c.max_ratio.is_finite() && f.max_ratio.is_finite() && f.max_ratio > 0.0;
        let drift = (f.max_ratio - c.max_ratio).abs() / f.max_ratio.max(1e-12);
        ok &= finite && drift < 0.15;
        detail.push_str(&format!("{}: {:.3}->{:.3} ({drift:.1e}); ", c.name, c.max_ratio, f.max_ratio));
    }
    let c1 = c1_a.max(c1_b);
    ok &= c1 <= 20.0;
    detail.push_str(&format!("bootstrap C1 {c1:.2} <= 20"));
    report(9, "inequality harness", ok, &detail);
}

#[test]
fn criterion_10_threshold_sweep() {
    // soft criterion, explicitly exploratory: each viscosity must end in a
    // finite threshold or an explicit no-instability record; a slope check
    // applies only when at least three thresholds are finite
    let nus = [10f64.powf(-2.5), 1e-3, 10f64.powf(-3.5)];
    let mut results = Vec::new();
    let mut ok = true;
    let mut detail = String::new();
    for &nu in &nus {
        let ws = WeightSet::new(nu).unwrap();
        let mut cfg = ProbeConfig::with_defaults(ws);
        cfg.seed = 77;
        let sweep = bisect_threshold(nu, &cfg).unwrap();
        let recorded = sweep.a_star.is_some() || sweep.no_instability_note.is_some();
        ok &= recorded;
        match (&sweep.a_star, &sweep.no_instability_note) {
            (Some(a), _) => detail.push_str(&format!("nu={nu:.2e}: A*={a:.3e}; ")),
            (None, Some(_)) => {
                let max_stable = sweep
                    .verdicts
                    .iter()
                    .map(|(a, _, _)| *a)
                    .fold(0.0f64, f64::max);
                detail.push_str(&format!(
                    "nu={nu:.2e}: no instability found (stable through A={max_stable:.3e}, {} probes); ",
                    sweep.verdicts.len()
                ));
            }
            (None, None) => detail.push_str(&format!("nu={nu:.2e}: MISSING RECORD; ")),
        }
        results.push(sweep);
    }
    let finite = results.iter().filter(|r| r.a_star.is_some()).count();
    if finite >= 3 {
        let fit = scaling_fit(&results).unwrap();
        ok &= (0.35..=0.70).contains(&fit.gamma);
        detail.push_str(&format!("gamma {:.3} in [0.35, 0.70]", fit.gamma));
    } else {
        detail.push_str(&format!(
            "{finite}/3 finite thresholds: slope check not applicable at desk scale"
        ));
    }
    report(10, "threshold sweep", ok, &detail);
}
