use couette2d::diagnostics::*;
use couette2d::nls2d::*;
use couette2d::weights::WeightSet;
use std::time::Instant;

fn main() {
    let nu = 1e-3;
    let ws = WeightSet::new(nu).unwrap();
    let (n, kmax, lx) = (48usize, 32usize, 50.0);
    for a in [1.3f64, 2.6, 5.0, 10.0, 20.0, 50.0] {
        let t0 = Instant::now();
        let dt = 0.01;
        let solver = Nls2dSolver::new(n, kmax, lx, nu, dt).unwrap();
        let jcache = JCache::build(&solver.grid, lx, kmax).unwrap();
        let cfg = InitConfig { amplitude: a, seed: 1, ..Default::default() };
        let mut st = init_perturbation(&solver.grid, &ws, lx, kmax, &cfg).unwrap();
        let (e0, _, _) = global_energy(&solver.grid, &st, &ws, &jcache).unwrap();
        let vel = solver.velocity_from_vorticity(&st).unwrap();
        let mut usum = 0.0f64;
        for m in &vel.u1 {
            for v in m.iter() {
                usum = usum.max(v.norm());
            }
        }
        let mut peak = 1.0f64;
        let mut prev = None;
        let mut status = "ran";
        for s in 0..3000 {
            match solver.step(&mut st, &mut prev) {
                Ok(()) => {}
                Err(e) => {
                    println!("  A={a}: step error at s={s}: {e}");
                    status = "err";
                    break;
                }
            }
            if (s + 1) % 20 == 0 {
                let (e, _, _) = global_energy(&solver.grid, &st, &ws, &jcache).unwrap();
                if !e.is_finite() {
                    status = "nan";
                    break;
                }
                peak = peak.max(e / e0);
                if peak > 10.0 {
                    status = "unstable";
                    break;
                }
            }
        }
        println!(
            "A={a:.2e}: u1max~{usum:.3} peak={peak:.3} status={status} t={:.2} [{:.0}s]",
            st.t,
            t0.elapsed().as_secs_f64()
        );
    }
}
