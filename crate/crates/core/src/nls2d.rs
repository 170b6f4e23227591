//! Desk-scale nonlinear 2D vorticity solver on a long periodic-in-x box
//! approximating the infinite channel: Fourier modes in x, Chebyshev
//! collocation in y, IMEX stepping with a 2/3-dealiased pseudospectral
//! nonlinear term.
//!
//! # Checkpoint layout
//!
//! Little-endian binary: the 8-byte magic `C2DCHK01`, then `u64 n`, `u64 K`,
//! `f64 Lx`, `f64 nu`, `f64 t`, then the modes `j = -K..K` in order, each as
//! `n+1` pairs `(re: f64, im: f64)`.

use std::io::{Read as _, Write as _};
use std::sync::Arc;

use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::{Fft, FftPlanner};

use crate::cheb::{apply_real, dirichlet_rows, ChebGrid, HelmholtzOp};
use crate::weights::WeightSet;
use crate::{Error, ModeField, Result};

const CHECKPOINT_MAGIC: &[u8; 8] = b"C2DCHK01";

/// Collection of vorticity modes `omega_{k_j}`, `k_j = 2 pi j / Lx`,
/// `j = -K..K`, stored at index `j + K`.
///
/// Invariants: `omega_{-j} = conj(omega_j)` (the physical field is real,
/// enforced by mirroring after every step) and every mode vanishes at the
/// walls. The `j = 0` mode is evolved but excluded from the weighted
/// functionals, whose low-frequency weight diverges at `k = 0`.
#[derive(Debug, Clone)]
pub struct FlowState {
    pub lx: f64,
    pub kmax: usize,
    pub nu: f64,
    pub t: f64,
    pub modes: Vec<ModeField>,
}

impl FlowState {
    pub fn zero(lx: f64, kmax: usize, nu: f64, n: usize) -> Self {
        Self {
            lx,
            kmax,
            nu,
            t: 0.0,
            modes: vec![ModeField::zeros(n + 1); 2 * kmax + 1],
        }
    }

    /// Wavenumber of storage slot `idx` (mode index `j = idx - K`).
    pub fn wavenumber(&self, idx: usize) -> f64 {
        let j = idx as i64 - self.kmax as i64;
        2.0 * std::f64::consts::PI * j as f64 / self.lx
    }

    pub fn mode(&self, j: i64) -> &ModeField {
        &self.modes[(j + self.kmax as i64) as usize]
    }

    /// Largest deviation from conjugate symmetry, relative to the state size.
    pub fn reality_defect(&self) -> f64 {
        let scale = self
            .modes
            .iter()
            .flat_map(|m| m.iter())
            .map(|v| v.norm())
            .fold(0.0f64, f64::max)
            .max(1e-300);
        let mut worst: f64 = 0.0;
        for j in 1..=self.kmax as i64 {
            let plus = self.mode(j);
            let minus = self.mode(-j);
            for i in 0..plus.len() {
                worst = worst.max((minus[i] - plus[i].conj()).norm());
            }
        }
        worst / scale
    }

    /// Largest boundary value over all modes, relative to the state size.
    pub fn boundary_defect(&self) -> f64 {
        let mut worst: f64 = 0.0;
        let mut scale: f64 = 1e-300;
        for m in &self.modes {
            worst = worst.max(m[0].norm()).max(m[m.len() - 1].norm());
            scale = scale.max(m.iter().map(|v| v.norm()).fold(0.0, f64::max));
        }
        worst / scale
    }
}

/// Configuration of the random initial perturbation.
#[derive(Debug, Clone)]
pub struct InitConfig {
    /// Target value of the anisotropic initial norm.
    pub amplitude: f64,
    pub seed: u64,
    /// Modes with `0 < k_j <= kmax_active` receive data. Defined in
    /// wavenumber (not mode index) so runs at different box lengths carry
    /// the same spectral support; at the default `Lx = 100` this is
    /// `|j| <= 8`.
    pub kmax_active: f64,
    /// Wall-normal sine modes `p = 1..=p_max`.
    pub p_max: usize,
}

impl Default for InitConfig {
    fn default() -> Self {
        Self { amplitude: 1e-3, seed: 1, kmax_active: 16.0 * std::f64::consts::PI / 100.0, p_max: 6 }
    }
}

/// Builds the random perturbation and rescales it so the anisotropic initial
/// norm equals `amplitude` exactly.
///
/// The spectral envelope is a low-order polynomial in `k` with seeded complex
/// coefficients per wall-normal mode, smooth in `k` so different box lengths
/// sample the same continuous spectrum; conjugate symmetry in `j` makes the
/// physical field real.
pub fn init_perturbation(
    grid: &ChebGrid,
    ws: &WeightSet,
    lx: f64,
    kmax: usize,
    cfg: &InitConfig,
) -> Result<FlowState> {
    use rand::{Rng, SeedableRng};
    if cfg.amplitude < 0.0 || !cfg.amplitude.is_finite() {
        return Err(Error::InvalidConfig(format!("amplitude must be >= 0, got {}", cfg.amplitude)));
    }
    if cfg.p_max == 0 || cfg.p_max > grid.n / 4 {
        return Err(Error::InvalidConfig(format!(
            "p_max must lie in 1..={}, got {}",
            grid.n / 4,
            cfg.p_max
        )));
    }
    if cfg.kmax_active <= 0.0 {
        return Err(Error::InvalidConfig("kmax_active must be positive".into()));
    }
    let mut state = FlowState::zero(lx, kmax, ws.nu, grid.n);
    if cfg.amplitude == 0.0 {
        return Ok(state);
    }
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut coeffs = vec![[Complex64::new(0.0, 0.0); 4]; cfg.p_max];
    for row in coeffs.iter_mut() {
        for c in row.iter_mut() {
            *c = Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
        }
    }
    let dk = 2.0 * std::f64::consts::PI / lx;
    for j in 1..=kmax {
        let k = dk * j as f64;
        if k > cfg.kmax_active {
            break;
        }
        let x = k / cfg.kmax_active;
        let mut field = ModeField::zeros(grid.n + 1);
        for (p, row) in coeffs.iter().enumerate() {
            // envelope vanishes linearly at k = 0: keeps the low-frequency
            // weight integrable to Riemann-sum accuracy under box refinement
            let amp: Complex64 = row
                .iter()
                .enumerate()
                .map(|(q, c)| c * x.powi(1 + q as i32))
                .sum();
            let p1 = (p + 1) as f64;
            for (i, y) in grid.nodes.iter().enumerate() {
                field[i] += amp
                    * (p1 * std::f64::consts::PI * (y + 1.0) / 2.0).sin();
            }
        }
        // the sine basis vanishes at the walls analytically; make it exact
        field[0] = Complex64::new(0.0, 0.0);
        field[grid.n] = Complex64::new(0.0, 0.0);
        state.modes[kmax + j] = field;
    }
    for j in 1..=kmax {
        state.modes[kmax - j] = state.modes[kmax + j].map(|v| v.conj());
    }
    let norm = crate::diagnostics::theorem_norm(grid, &state, ws);
    if norm <= 0.0 {
        return Err(Error::InvalidConfig(
            "active mode range is empty at this box length".into(),
        ));
    }
    let scale = cfg.amplitude / norm;
    for m in state.modes.iter_mut() {
        for v in m.iter_mut() {
            *v *= scale;
        }
    }
    Ok(state)
}

/// Per-mode velocity components `(u1_k, u2_k) = (d_y phi_k, -i k phi_k)`.
pub struct Velocity {
    pub u1: Vec<ModeField>,
    pub u2: Vec<ModeField>,
}

/// Precomputed solver state for a fixed `(n, K, Lx, nu, dt)`.
pub struct Nls2dSolver {
    pub grid: ChebGrid,
    pub kmax: usize,
    pub lx: f64,
    pub nu: f64,
    pub dt: f64,
    /// dealiased physical resolution in x (smallest 2^a 3^b >= 3K+1)
    pub mx: usize,
    helmholtz: Vec<HelmholtzOp>,
    implicit: Vec<nalgebra::linalg::LU<f64, nalgebra::Dyn, nalgebra::Dyn>>,
    explicit: Vec<nalgebra::DMatrix<f64>>,
    fft_fwd: Arc<dyn Fft<f64>>,
    fft_inv: Arc<dyn Fft<f64>>,
}

fn next_fast_len(target: usize) -> usize {
    let mut best = usize::MAX;
    let mut p2 = 1usize;
    while p2 / 2 < best {
        let mut v = p2;
        while v < target {
            v *= 3;
        }
        if v < best {
            best = v;
        }
        p2 *= 2;
        if p2 > 4 * target {
            break;
        }
    }
    best
}

impl Nls2dSolver {
    pub fn new(n: usize, kmax: usize, lx: f64, nu: f64, dt: f64) -> Result<Self> {
        if lx < 50.0 {
            return Err(Error::InvalidConfig(format!("box length must be >= 50, got {lx}")));
        }
        if !(nu > 0.0 && nu < 1.0) {
            return Err(Error::InvalidConfig(format!("viscosity must lie in (0,1), got {nu}")));
        }
        if dt <= 0.0 {
            return Err(Error::InvalidConfig(format!("time step must be positive, got {dt}")));
        }
        let grid = crate::cheb::build_grid(n)?;
        let np = n + 1;
        let dk = 2.0 * std::f64::consts::PI / lx;
        let mut helmholtz = Vec::with_capacity(kmax + 1);
        let mut implicit = Vec::with_capacity(kmax + 1);
        let mut explicit = Vec::with_capacity(kmax + 1);
        for j in 0..=kmax {
            let k = dk * j as f64;
            helmholtz.push(HelmholtzOp::new(&grid, k)?);
            let half = 0.5 * nu * dt;
            let mut im = nalgebra::DMatrix::<f64>::identity(np, np);
            let mut ex = nalgebra::DMatrix::<f64>::identity(np, np);
            for r in 0..np {
                for c in 0..np {
                    let lap = grid.d2[(r, c)] - if r == c { k * k } else { 0.0 };
                    im[(r, c)] -= half * lap;
                    ex[(r, c)] += half * lap;
                }
            }
            dirichlet_rows(&mut im);
            implicit.push(nalgebra::linalg::LU::new(im));
            explicit.push(ex);
        }
        let mx = next_fast_len(3 * kmax + 1);
        let mut planner = FftPlanner::new();
        let fft_fwd = planner.plan_fft_forward(mx);
        let fft_inv = planner.plan_fft_inverse(mx);
        Ok(Self { grid, kmax, lx, nu, dt, mx, helmholtz, implicit, explicit, fft_fwd, fft_inv })
    }

    fn check_state(&self, state: &FlowState) -> Result<()> {
        if state.kmax != self.kmax || state.modes.len() != 2 * self.kmax + 1 {
            return Err(Error::ShapeMismatch {
                expected: 2 * self.kmax + 1,
                got: state.modes.len(),
            });
        }
        if state.modes[0].len() != self.grid.n + 1 {
            return Err(Error::ShapeMismatch {
                expected: self.grid.n + 1,
                got: state.modes[0].len(),
            });
        }
        Ok(())
    }

    /// Stream function of one stored mode.
    pub fn stream_function(&self, state: &FlowState, idx: usize) -> Result<ModeField> {
        let j = idx as i64 - self.kmax as i64;
        if j >= 0 {
            self.helmholtz[j as usize].solve(&state.modes[idx])
        } else {
            // phi_{-k} = conj(phi_k) path keeps one solver per |j|
            let conj = state.modes[idx].map(|v| v.conj());
            Ok(self.helmholtz[(-j) as usize].solve(&conj)?.map(|v| v.conj()))
        }
    }

    /// Per-mode velocity from the vorticity.
    pub fn velocity_from_vorticity(&self, state: &FlowState) -> Result<Velocity> {
        self.check_state(state)?;
        let mut u1 = Vec::with_capacity(state.modes.len());
        let mut u2 = Vec::with_capacity(state.modes.len());
        for idx in 0..state.modes.len() {
            let phi = self.stream_function(state, idx)?;
            let k = state.wavenumber(idx);
            u1.push(apply_real(&self.grid.d1, &phi));
            u2.push(phi.map(|v| Complex64::new(0.0, -k) * v));
        }
        Ok(Velocity { u1, u2 })
    }

    /// Pseudospectral advection term `n_{omega,k} = -(u . grad omega)_k` on
    /// the dealiased x-grid, plus the physical speed maxima for CFL checks.
    fn nonlinear_with_speeds(&self, state: &FlowState) -> Result<(Vec<ModeField>, f64, f64)> {
        self.check_state(state)?;
        let np = self.grid.n + 1;
        let km = self.kmax;
        let vel = self.velocity_from_vorticity(state)?;
        let mut omx = Vec::with_capacity(state.modes.len());
        let mut omy = Vec::with_capacity(state.modes.len());
        for idx in 0..state.modes.len() {
            let k = state.wavenumber(idx);
            omx.push(state.modes[idx].map(|v| Complex64::new(0.0, k) * v));
            omy.push(apply_real(&self.grid.d1, &state.modes[idx]));
        }
        // per y-row transforms; rows are independent
        let rows: Vec<(Vec<Complex64>, f64, f64)> = (0..np)
            .into_par_iter()
            .map(|i| {
                let mx = self.mx;
                let mut bu1 = vec![Complex64::new(0.0, 0.0); mx];
                let mut bu2 = bu1.clone();
                let mut bwx = bu1.clone();
                let mut bwy = bu1.clone();
                for idx in 0..state.modes.len() {
                    let j = idx as i64 - km as i64;
                    let slot = j.rem_euclid(mx as i64) as usize;
                    bu1[slot] = vel.u1[idx][i];
                    bu2[slot] = vel.u2[idx][i];
                    bwx[slot] = omx[idx][i];
                    bwy[slot] = omy[idx][i];
                }
                self.fft_inv.process(&mut bu1);
                self.fft_inv.process(&mut bu2);
                self.fft_inv.process(&mut bwx);
                self.fft_inv.process(&mut bwy);
                let mut prod = vec![Complex64::new(0.0, 0.0); mx];
                let mut m1: f64 = 0.0;
                let mut m2: f64 = 0.0;
                for x in 0..mx {
                    // the physical fields are real up to roundoff
                    let u1 = bu1[x].re;
                    let u2 = bu2[x].re;
                    m1 = m1.max(u1.abs());
                    m2 = m2.max(u2.abs());
                    prod[x] = Complex64::new(-(u1 * bwx[x].re + u2 * bwy[x].re), 0.0);
                }
                self.fft_fwd.process(&mut prod);
                (prod, m1, m2)
            })
            .collect();
        let mut out = vec![ModeField::zeros(np); state.modes.len()];
        let mut max_u1: f64 = 0.0;
        let mut max_u2: f64 = 0.0;
        let scale = 1.0 / self.mx as f64;
        for (i, (prod, m1, m2)) in rows.iter().enumerate() {
            max_u1 = max_u1.max(*m1);
            max_u2 = max_u2.max(*m2);
            for idx in 0..out.len() {
                let j = idx as i64 - km as i64;
                let slot = j.rem_euclid(self.mx as i64) as usize;
                out[idx][i] = prod[slot] * scale;
            }
        }
        Ok((out, max_u1, max_u2))
    }

    /// The nonlinear term alone.
    pub fn nonlinear_term(&self, state: &FlowState) -> Result<Vec<ModeField>> {
        Ok(self.nonlinear_with_speeds(state)?.0)
    }

    /// Largest stable step for the state's current velocity field.
    pub fn cfl_limit_of(&self, state: &FlowState) -> Result<f64> {
        let (_, mu1, mu2) = self.nonlinear_with_speeds(state)?;
        Ok(self.cfl_limit(state, mu1, mu2))
    }

    fn cfl_limit(&self, state: &FlowState, max_u1: f64, max_u2: f64) -> f64 {
        let dx = self.lx / self.mx as f64;
        let adv_x = max_u1 + state.modes.iter().map(|_| 1.0).next().unwrap_or(1.0); // |u1 + y| <= |u1| + 1
        let mut limit = 0.5 * dx / adv_x.max(1e-12);
        if max_u2 > 0.0 {
            // tightest wall-normal spacing; u2 vanishes at the walls, so the
            // interior spacing governs in practice, but the global bound is a
            // safe conservative check
            let mut dy_min = f64::INFINITY;
            for i in 1..=self.grid.n {
                dy_min = dy_min.min((self.grid.nodes[i - 1] - self.grid.nodes[i]).abs());
            }
            limit = limit.min(0.5 * dy_min / max_u2);
        }
        limit
    }

    /// One IMEX step: nonlinear term and shear advection explicit (AB2 after
    /// startup), diffusion Crank-Nicolson, Dirichlet rows enforced, negative
    /// modes mirrored so the physical field stays exactly real.
    pub fn step(&self, state: &mut FlowState, prev: &mut Option<Vec<ModeField>>) -> Result<()> {
        self.step_inner(state, prev, true)
    }

    /// Same stepping with the quadratic term suppressed — the mode-decoupled
    /// linearized flow, used by the linearization-consistency oracle and the
    /// one-step energy-budget split.
    pub fn step_linearized(
        &self,
        state: &mut FlowState,
        prev: &mut Option<Vec<ModeField>>,
    ) -> Result<()> {
        self.step_inner(state, prev, false)
    }

    fn step_inner(
        &self,
        state: &mut FlowState,
        prev: &mut Option<Vec<ModeField>>,
        with_nonlinear: bool,
    ) -> Result<()> {
        self.check_state(state)?;
        let np = self.grid.n + 1;
        let km = self.kmax;
        let mut expl = if with_nonlinear {
            let (nl, mu1, mu2) = self.nonlinear_with_speeds(state)?;
            let limit = self.cfl_limit(state, mu1, mu2);
            if self.dt > limit {
                return Err(Error::CflViolation { dt: self.dt, limit });
            }
            nl
        } else {
            vec![ModeField::zeros(np); state.modes.len()]
        };
        for idx in 0..state.modes.len() {
            let k = state.wavenumber(idx);
            for i in 0..np {
                expl[idx][i] += Complex64::new(0.0, -k * self.grid.nodes[i]) * state.modes[idx][i];
            }
        }
        let extrap: Vec<ModeField> = match prev.as_ref() {
            None => expl.clone(),
            Some(p) => expl
                .iter()
                .zip(p)
                .map(|(now, old)| {
                    ModeField::from_fn(np, |i, _| 1.5 * now[i] - 0.5 * old[i])
                })
                .collect(),
        };
        *prev = Some(expl);
        // implicit solve for j >= 0, mirror j < 0
        for j in 0..=km {
            let idx = km + j;
            let mut rhs = apply_real(&self.explicit[j], &state.modes[idx]);
            for i in 0..np {
                rhs[i] += self.dt * extrap[idx][i];
            }
            rhs[0] = Complex64::new(0.0, 0.0);
            rhs[np - 1] = Complex64::new(0.0, 0.0);
            let re = nalgebra::DVector::from_fn(np, |i, _| rhs[i].re);
            let im = nalgebra::DVector::from_fn(np, |i, _| rhs[i].im);
            let sr = self.implicit[j]
                .solve(&re)
                .ok_or_else(|| Error::NumericalFailure("singular implicit solve".into()))?;
            let si = self.implicit[j]
                .solve(&im)
                .ok_or_else(|| Error::NumericalFailure("singular implicit solve".into()))?;
            for i in 0..np {
                state.modes[idx][i] = Complex64::new(sr[i], si[i]);
                if !sr[i].is_finite() || !si[i].is_finite() {
                    return Err(Error::NumericalFailure("NaN in nonlinear step".into()));
                }
            }
            state.modes[idx][0] = Complex64::new(0.0, 0.0);
            state.modes[idx][np - 1] = Complex64::new(0.0, 0.0);
        }
        for j in 1..=km {
            state.modes[km - j] = state.modes[km + j].map(|v| v.conj());
        }
        state.t += self.dt;
        debug_assert!(state.reality_defect() <= 1e-12);
        debug_assert!(state.boundary_defect() <= 1e-8);
        Ok(())
    }
}

/// Writes the documented binary checkpoint.
pub fn write_checkpoint(path: &std::path::Path, state: &FlowState, n: usize) -> Result<()> {
    let mut buf = Vec::new();
    buf.extend_from_slice(CHECKPOINT_MAGIC);
    buf.extend_from_slice(&(n as u64).to_le_bytes());
    buf.extend_from_slice(&(state.kmax as u64).to_le_bytes());
    buf.extend_from_slice(&state.lx.to_le_bytes());
    buf.extend_from_slice(&state.nu.to_le_bytes());
    buf.extend_from_slice(&state.t.to_le_bytes());
    for m in &state.modes {
        for v in m.iter() {
            buf.extend_from_slice(&v.re.to_le_bytes());
            buf.extend_from_slice(&v.im.to_le_bytes());
        }
    }
    std::fs::File::create(path)
        .and_then(|mut f| f.write_all(&buf))
        .map_err(|e| Error::NumericalFailure(format!("checkpoint write failed: {e}")))
}

/// Reads a checkpoint back; returns the state and the grid size it was
/// written with.
pub fn read_checkpoint(path: &std::path::Path) -> Result<(FlowState, usize)> {
    let mut bytes = Vec::new();
    std::fs::File::open(path)
        .and_then(|mut f| f.read_to_end(&mut bytes))
        .map_err(|e| Error::NumericalFailure(format!("checkpoint read failed: {e}")))?;
    if bytes.len() < 48 || &bytes[0..8] != CHECKPOINT_MAGIC {
        return Err(Error::InvalidConfig("not a checkpoint file".into()));
    }
    let mut off = 8;
    let mut take_u64 = |bytes: &[u8]| {
        let v = u64::from_le_bytes(bytes[off..off + 8].try_into().unwrap());
        off += 8;
        v
    };
    let n = take_u64(&bytes) as usize;
    let kmax = take_u64(&bytes) as usize;
    let mut take_f64 = |bytes: &[u8]| {
        let v = f64::from_le_bytes(bytes[off..off + 8].try_into().unwrap());
        off += 8;
        v
    };
    let lx = take_f64(&bytes);
    let nu = take_f64(&bytes);
    let t = take_f64(&bytes);
    let nmodes = 2 * kmax + 1;
    let expected = off + nmodes * (n + 1) * 16;
    if bytes.len() != expected {
        return Err(Error::ShapeMismatch { expected, got: bytes.len() });
    }
    let mut modes = Vec::with_capacity(nmodes);
    for _ in 0..nmodes {
        let mut m = ModeField::zeros(n + 1);
        for i in 0..=n {
            let re = f64::from_le_bytes(bytes[off..off + 8].try_into().unwrap());
            let im = f64::from_le_bytes(bytes[off + 8..off + 16].try_into().unwrap());
            m[i] = Complex64::new(re, im);
            off += 16;
        }
        modes.push(m);
    }
    Ok((FlowState { lx, kmax, nu, t, modes }, n))
}
