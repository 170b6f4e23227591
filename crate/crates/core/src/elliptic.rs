//! Explicit Dirichlet Green's function of the per-mode Helmholtz operator
//! `(-k^2 + d_y^2)` on [-1, 1], with a quadrature realization accurate enough
//! to cross-validate the collocation solve.

use nalgebra::DMatrix;

use crate::cheb::{apply_real, coeff_matrix, ChebGrid};
use crate::quadrule::{gauss_legendre, graded_panels};
use crate::{Error, ModeField, Result};

/// Below this |k| the analytic k->0 limit of the kernel is used; the
/// exponential-difference form loses digits to cancellation there.
pub const SMALL_K_CUTOFF: f64 = 1e-4;

/// Green's function of `Delta_k` with homogeneous Dirichlet data, sampled on
/// grid nodes, together with a product-integration realization of
/// `f -> int G_k(y, y') f(y') dy'`.
///
/// `values[(i, j)] = G_k(y_i, y_j)`. The kernel is symmetric, nonpositive,
/// and vanishes whenever either argument is +-1.
pub struct GreensMatrix {
    pub k: f64,
    pub values: DMatrix<f64>,
    /// Row-wise moments of the kernel against the Chebyshev interpolation
    /// basis, mapped back to node values. The kernel has a derivative kink on
    /// the diagonal, which caps plain Clenshaw-Curtis at O(n^-2); exact
    /// moments restore interpolation-limited accuracy.
    app: DMatrix<f64>,
}

/// Kernel evaluation, stable for all finite `k`.
///
/// For `|k| >=` [`SMALL_K_CUTOFF`] the sinh product is rewritten as a sum of
/// exponentials with nonpositive exponents, so there is no overflow for large
/// `|k|`; below the cutoff the analytic limit `-(1 - y_max)(1 + y_min)/2`
/// applies. Even in `k`.
pub fn greens_value(k: f64, y: f64, yp: f64) -> f64 {
    let ka = k.abs();
    let (lo, hi) = if y <= yp { (y, yp) } else { (yp, y) };
    let a = 1.0 - hi;
    let b = 1.0 + lo;
    if a == 0.0 || b == 0.0 {
        return 0.0;
    }
    if ka < SMALL_K_CUTOFF {
        return -a * b / 2.0;
    }
    // sinh(ka) sinh(kb) / sinh(2k), all exponents <= 0; terms paired so the
    // cancellation at a -> 0 or b -> 0 stays exact
    let t1 = (ka * (a + b - 2.0)).exp();
    let t2 = (-ka * (a + b + 2.0)).exp();
    let t3 = (ka * (a - b - 2.0)).exp();
    let t4 = (-ka * (a - b + 2.0)).exp();
    let num = (t1 - t3) - (t4 - t2);
    -num / (2.0 * (1.0 - (-4.0 * ka).exp()) * ka)
}

/// Assembles kernel samples and the product-integration apply matrix.
pub fn assemble_greens(grid: &ChebGrid, k: f64) -> Result<GreensMatrix> {
    if !k.is_finite() {
        return Err(Error::InvalidConfig(format!("wavenumber must be finite, got {k}")));
    }
    if k == 0.0 {
        return Err(Error::InvalidConfig(
            "wavenumber must be nonzero; the small-k limit branch engages below the cutoff".into(),
        ));
    }
    let n = grid.n;
    let np = n + 1;
    let values = DMatrix::from_fn(np, np, |i, j| greens_value(k, grid.nodes[i], grid.nodes[j]));

    // Moments m[i][q] = int_0^pi G(y_i, cos t) cos(q t) sin t dt, panels split
    // and graded at the kink angle theta_i.
    let (gx, gw) = gauss_legendre(24);
    let mut moments = DMatrix::<f64>::zeros(np, np);
    for i in 1..n {
        let yi = grid.nodes[i];
        let theta_i = yi.clamp(-1.0, 1.0).acos();
        let edges = graded_panels(theta_i, k, n);
        for pair in edges.windows(2) {
            let (t0, t1) = (pair[0], pair[1]);
            let tm = 0.5 * (t0 + t1);
            let th = 0.5 * (t1 - t0);
            for (xg, wg) in gx.iter().zip(&gw) {
                let t = tm + th * xg;
                let scale = wg * th * greens_value(k, yi, t.cos()) * t.sin();
                for q in 0..np {
                    moments[(i, q)] += scale * (q as f64 * t).cos();
                }
            }
        }
    }
    let app = &moments * coeff_matrix(n);
    Ok(GreensMatrix { k, values, app })
}

/// Applies the Green's operator: `phi(y_i) ~= int G_k(y_i, y') f(y') dy'`.
/// Output vanishes at `y = +-1` exactly.
pub fn apply_greens(gm: &GreensMatrix, grid: &ChebGrid, f: &ModeField) -> Result<ModeField> {
    if f.len() != grid.n + 1 || gm.app.nrows() != grid.n + 1 {
        return Err(Error::ShapeMismatch { expected: grid.n + 1, got: f.len() });
    }
    Ok(apply_real(&gm.app, f))
}
