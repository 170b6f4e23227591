//! Frequency weights and the per-mode energy / dissipation functionals that
//! drive the Lyapunov analysis.

use crate::cheb::{differentiate, ChebGrid};
use crate::jop::SingularOperator;
use crate::{Error, ModeField, Result};

/// Viscosity, norm parameters, and the calibrated energy constants.
///
/// * `c_alpha`, `c_beta`, `c_tau` weight the gradient, cross, and singular
///   terms of the per-mode energy;
/// * `c0` is the Lyapunov decay constant certified by calibration, and
///   `c <= c0/4` the exponential weight rate of the global functionals;
/// * `c_j_cap` is the measured operator-norm cap of the singular operator,
///   entering the coercivity margin.
#[derive(Debug, Clone)]
pub struct WeightSet {
    pub nu: f64,
    pub m: f64,
    pub eps: f64,
    pub c_alpha: f64,
    pub c_beta: f64,
    pub c_tau: f64,
    pub c0: f64,
    pub c: f64,
    pub c_j_cap: f64,
}

impl WeightSet {
    /// Defaults: `m = 2`, `eps = 0.08`, and the energy constants produced by
    /// the calibration grid search at the reference resolution (n = 64,
    /// nu in {1e-3, 1e-4}, k in {0.5, 1, 2, 4, nu}, ten random data each):
    /// `(c_alpha, c_beta, c_tau, c0) = (0.05, 0.05, 0.1, 0.02)`, `c = c0/4`.
    /// The calibration run is the authority for these values.
    pub fn new(nu: f64) -> Result<Self> {
        let ws = Self {
            nu,
            m: 2.0,
            eps: 0.08,
            c_alpha: 0.05,
            c_beta: 0.05,
            c_tau: 0.1,
            c0: 0.02,
            c: 0.005,
            c_j_cap: 0.8,
        };
        ws.validate()?;
        Ok(ws)
    }

    pub fn with_constants(mut self, c_alpha: f64, c_beta: f64, c_tau: f64, c0: f64) -> Self {
        self.c_alpha = c_alpha;
        self.c_beta = c_beta;
        self.c_tau = c_tau;
        self.c0 = c0;
        self.c = c0 / 4.0;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.nu > 0.0 && self.nu < 1.0) {
            return Err(Error::InvalidConfig(format!(
                "viscosity must lie in (0, 1), got {}",
                self.nu
            )));
        }
        if !(self.m > 1.0) {
            return Err(Error::InvalidConfig(format!("m must exceed 1, got {}", self.m)));
        }
        if !(self.eps > 0.0 && self.eps < 1.0 / 12.0) {
            return Err(Error::InvalidConfig(format!(
                "\u{3b5} must lie in (0, 1/12), got {}",
                self.eps
            )));
        }
        if self.c_alpha <= 0.0 || self.c_beta <= 0.0 || self.c_tau <= 0.0 || self.c0 <= 0.0 {
            return Err(Error::InvalidConfig("energy constants must be positive".into()));
        }
        if self.c > self.c0 / 4.0 + 1e-15 {
            return Err(Error::InvalidConfig(format!(
                "exponential rate c = {} exceeds c0/4 = {}",
                self.c,
                self.c0 / 4.0
            )));
        }
        if self.c_tau * self.c_j_cap + self.c_beta / 2.0 >= 0.5 {
            return Err(Error::InvalidConfig(format!(
                "coercivity margin violated: c_tau*C_J + c_beta/2 = {} >= 1/2",
                self.c_tau * self.c_j_cap + self.c_beta / 2.0
            )));
        }
        Ok(())
    }

    /// Lower coercivity factor `1 - c_tau C_J - c_beta/2` of the energy
    /// sandwich.
    pub fn coercivity_floor(&self) -> f64 {
        1.0 - self.c_tau * self.c_j_cap - self.c_beta / 2.0
    }
}

/// Per-mode weights `alpha(k)`, `beta(k)`, `lambda_k` at a given viscosity.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModeWeights {
    pub alpha: f64,
    pub beta: f64,
    pub lambda: f64,
}

/// Piecewise weight evaluation. At `|k| = nu` the `|k| >= nu` branch applies,
/// which is continuous for `alpha` and `lambda`; `beta` jumps by construction
/// of the printed piecewise definition.
pub fn mode_weights(k: f64, nu: f64) -> Result<ModeWeights> {
    if k == 0.0 || !k.is_finite() {
        return Err(Error::InvalidConfig(format!("wavenumber must be nonzero, got {k}")));
    }
    if !(nu > 0.0 && nu < 1.0) {
        return Err(Error::InvalidConfig(format!("viscosity must lie in (0,1), got {nu}")));
    }
    let ka = k.abs();
    Ok(if ka >= nu {
        ModeWeights {
            alpha: nu.powf(2.0 / 3.0) * ka.powf(-2.0 / 3.0),
            beta: nu.powf(1.0 / 3.0) * ka.powf(-4.0 / 3.0),
            lambda: nu.powf(1.0 / 3.0) * ka.powf(2.0 / 3.0),
        }
    } else {
        ModeWeights { alpha: 1.0, beta: 0.0, lambda: nu }
    })
}

/// Anisotropic frequency weight `<k>^{2m} <k^{-1}>^{2 eps}` with the bracket
/// convention `<x> = sqrt(1 + x^2)`. Diverges at `k = 0`, which is rejected.
pub fn aniso_weight(k: f64, m: f64, eps: f64) -> Result<f64> {
    if k == 0.0 || !k.is_finite() {
        return Err(Error::InvalidConfig(format!(
            "anisotropic weight undefined at k = {k}"
        )));
    }
    Ok((1.0 + k * k).powf(m) * (1.0 + 1.0 / (k * k)).powf(eps))
}

/// Constant-independent ingredients of the per-mode energy and dissipation:
/// everything quadratic in the state that the functionals combine linearly.
#[derive(Debug, Clone, Copy)]
pub struct EnergyComponents {
    /// `||omega||^2`
    pub l2: f64,
    /// `||d_y omega||^2`
    pub grad_l2: f64,
    /// `Re <i k omega, d_y omega>`
    pub cross: f64,
    /// `Re <omega, J omega>`
    pub jform: f64,
    /// `Re <J d_y omega, d_y omega>`
    pub jform_grad: f64,
    /// the five dissipation pieces
    pub dis: [f64; 5],
}

impl EnergyComponents {
    /// Per-mode energy for the given constants; the cross term enters only
    /// for `|k| >= nu`.
    pub fn energy(&self, ws: &WeightSet, mw: &ModeWeights, k: f64) -> f64 {
        let cross = if k.abs() >= ws.nu { ws.c_beta * mw.beta * self.cross } else { 0.0 };
        self.l2 + ws.c_alpha * mw.alpha * self.grad_l2 - cross
            + ws.c_tau * self.jform
            + ws.c_tau * ws.c_alpha * mw.alpha * self.jform_grad
    }

    pub fn dissipation_total(&self) -> f64 {
        self.dis.iter().sum()
    }
}

/// Evaluates all energy/dissipation ingredients from the state and its
/// stream function. `phi` must solve the Dirichlet problem for `omega`.
pub fn mode_components(
    grid: &ChebGrid,
    jop: &SingularOperator,
    mw: &ModeWeights,
    k: f64,
    nu: f64,
    omega: &ModeField,
    phi: &ModeField,
) -> Result<EnergyComponents> {
    let dom = differentiate(grid, omega, 1)?;
    let d2om = differentiate(grid, omega, 2)?;
    let dphi = differentiate(grid, phi, 1)?;
    let d2phi = differentiate(grid, phi, 2)?;
    let l2 = grid.norm_sq(omega);
    let grad_l2 = grid.norm_sq(&dom);
    // Re <ik omega, d_y omega> = k Im <omega, d_y omega>
    let cross = k * grid.inner(omega, &dom).im;
    let jf = jop.apply(omega)?;
    let jdf = jop.apply(&dom)?;
    let jform = grid.inner(omega, &jf).re;
    let jform_grad = grid.inner(&jdf, &dom).re;
    let k2 = k * k;
    let dis1 = nu * (k2 * l2 + grad_l2);
    let dis2 = nu * mw.alpha * (k2 * grad_l2 + grid.norm_sq(&d2om));
    let dis3 = mw.lambda * l2;
    let phi_l2 = grid.norm_sq(phi);
    let dphi_l2 = grid.norm_sq(&dphi);
    let dis4 = k2 * (k2 * phi_l2 + dphi_l2);
    let dis5 = mw.alpha * k2 * (k2 * dphi_l2 + grid.norm_sq(&d2phi));
    Ok(EnergyComponents { l2, grad_l2, cross, jform, jform_grad, dis: [dis1, dis2, dis3, dis4, dis5] })
}

/// Per-mode coercive energy `E_k[omega]`. Requires `omega(+-1) = 0` up to
/// `1e-10 * ||omega||`.
pub fn mode_energy(
    grid: &ChebGrid,
    jop: &SingularOperator,
    ws: &WeightSet,
    mw: &ModeWeights,
    k: f64,
    omega: &ModeField,
) -> Result<f64> {
    check_boundary(grid, omega)?;
    let dom = differentiate(grid, omega, 1)?;
    let l2 = grid.norm_sq(omega);
    let grad_l2 = grid.norm_sq(&dom);
    let cross = k * grid.inner(omega, &dom).im;
    let jf = jop.apply(omega)?;
    let jdf = jop.apply(&dom)?;
    let jform = grid.inner(omega, &jf).re;
    let jform_grad = grid.inner(&jdf, &dom).re;
    let cross_term = if k.abs() >= ws.nu { ws.c_beta * mw.beta * cross } else { 0.0 };
    Ok(l2 + ws.c_alpha * mw.alpha * grad_l2 - cross_term
        + ws.c_tau * jform
        + ws.c_tau * ws.c_alpha * mw.alpha * jform_grad)
}

fn check_boundary(grid: &ChebGrid, omega: &ModeField) -> Result<()> {
    let norm = grid.norm_sq(omega).sqrt();
    let b = omega[0].norm().max(omega[grid.n].norm());
    if b > 1e-10 * norm.max(1e-300) {
        return Err(Error::BoundaryViolation(format!(
            "omega(+-1) = {b:e} exceeds 1e-10 * ||omega|| = {:e}",
            1e-10 * norm
        )));
    }
    Ok(())
}

/// The five dissipation functionals and their sum. `phi` is cross-checked
/// against `omega` through the Helmholtz operator before use.
pub fn mode_dissipation(
    grid: &ChebGrid,
    ws: &WeightSet,
    mw: &ModeWeights,
    k: f64,
    omega: &ModeField,
    phi: &ModeField,
) -> Result<([f64; 5], f64)> {
    if omega.len() != grid.n + 1 || phi.len() != grid.n + 1 {
        return Err(Error::ShapeMismatch { expected: grid.n + 1, got: omega.len().min(phi.len()) });
    }
    // guard: phi must actually solve Delta_k phi = omega in the interior
    let d2phi = differentiate(grid, phi, 2)?;
    let mut num = 0.0;
    let mut den = 0.0;
    for j in 1..grid.n {
        num += (d2phi[j] - k * k * phi[j] - omega[j]).norm_sqr();
        den += omega[j].norm_sqr();
    }
    if den > 0.0 && (num / den).sqrt() > 1e-6 {
        return Err(Error::NumericalFailure(format!(
            "phi/omega inconsistent: Helmholtz residual {:.3e}",
            (num / den).sqrt()
        )));
    }
    let dom = differentiate(grid, omega, 1)?;
    let d2om = differentiate(grid, omega, 2)?;
    let dphi = differentiate(grid, phi, 1)?;
    let k2 = k * k;
    let l2 = grid.norm_sq(omega);
    let grad_l2 = grid.norm_sq(&dom);
    let dis = [
        ws.nu * (k2 * l2 + grad_l2),
        ws.nu * mw.alpha * (k2 * grad_l2 + grid.norm_sq(&d2om)),
        mw.lambda * l2,
        k2 * (k2 * grid.norm_sq(phi) + grid.norm_sq(&dphi)),
        mw.alpha * k2 * (k2 * grid.norm_sq(&dphi) + grid.norm_sq(&d2phi)),
    ];
    Ok((dis, dis.iter().sum()))
}
