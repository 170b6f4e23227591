//! Spectral laboratory for perturbed Couette flow in the channel `R x [-1,1]`.
//!
//! The crate assembles the building blocks needed to study the stability of
//! the linear shear profile under Navier slip boundary conditions, which here
//! reduce to homogeneous Dirichlet data for the perturbation vorticity and
//! stream function:
//!
//! * [`cheb`] — Chebyshev collocation in the wall-normal coordinate,
//! * [`elliptic`] — the explicit Dirichlet Green's function of the per-mode
//!   Helmholtz operator, cross-validated against the collocation solve,
//! * [`jop`] — the singular integral operator built from that Green's
//!   function, whose quadratic form feeds the inviscid-damping terms of the
//!   energy budget,
//! * [`weights`] — frequency weights and the per-mode energy/dissipation
//!   functionals,
//! * [`linear`] — per-mode linear evolution, Lyapunov monitoring, constant
//!   calibration, and the free-space closed-form oracle,
//! * [`nls2d`] — the nonlinear 2D vorticity solver on a long periodic box,
//! * [`diagnostics`] — globally weighted functionals, nonlinear diagnostics,
//!   and empirical inequality checks,
//! * [`threshold`] — amplitude sweeps probing the `nu^(1/2)` stability
//!   threshold.

pub mod cheb;
pub mod diagnostics;
pub mod elliptic;
pub mod jop;
pub mod linear;
pub mod nls2d;
pub(crate) mod quadrule;
pub mod threshold;
pub mod weights;

use nalgebra::DVector;
use num_complex::Complex64;

/// Complex-valued function of `y` sampled at the collocation nodes of a grid,
/// at a fixed streamwise wavenumber.
pub type ModeField = DVector<Complex64>;

/// Errors surfaced by the numerical kernels.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("length mismatch: expected {expected}, got {got}")]
    ShapeMismatch { expected: usize, got: usize },
    #[error("boundary condition violated: {0}")]
    BoundaryViolation(String),
    #[error("numerical failure: {0}")]
    NumericalFailure(String),
    #[error("CFL violation: dt = {dt} exceeds limit {limit}")]
    CflViolation { dt: f64, limit: f64 },
    #[error("inconclusive: {0}")]
    Inconclusive(String),
}

pub type Result<T> = std::result::Result<T, Error>;
