//! Panel quadrature helpers shared by the kernel assemblies.

/// Gauss-Legendre nodes and weights on [-1, 1], by Newton iteration on the
/// Legendre recurrence.
pub(crate) fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n {
        // Chebyshev-based initial guess for the i-th root.
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        for _ in 0..100 {
            let (p, dp) = legendre_and_derivative(n, x);
            let dx = p / dp;
            x -= dx;
            if dx.abs() < 1e-15 {
                break;
            }
        }
        let (_, dp) = legendre_and_derivative(n, x);
        nodes[i] = x;
        weights[i] = 2.0 / ((1.0 - x * x) * dp * dp);
    }
    nodes.reverse();
    weights.reverse();
    (nodes, weights)
}

fn legendre_and_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for m in 2..=n {
        let m = m as f64;
        let p2 = ((2.0 * m - 1.0) * x * p1 - (m - 1.0) * p0) / m;
        p0 = p1;
        p1 = p2;
    }
    let dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, dp)
}

/// Panel edges on [0, pi] for integrating a kernel with a kink at `theta_i`,
/// geometrically graded away from the kink. The first panel width resolves
/// the kernel decay scale `1/(|k| sin(theta_i))`; panels are capped so a
/// fixed-order rule resolves oscillations up to degree `qmax`.
pub(crate) fn graded_panels(theta_i: f64, k: f64, qmax: usize) -> Vec<f64> {
    let base = (8.0 / (qmax.max(8) as f64)).min(0.45);
    let mut edges = vec![theta_i];
    for (sgn, stop) in [(-1.0, 0.0), (1.0, std::f64::consts::PI)] {
        let mut t = theta_i;
        let mut wloc = base.min(1.0 / (k.abs() * theta_i.sin().max(0.05)).max(1.0));
        while (stop - t) * sgn > 1e-15 {
            let mut t2 = t + sgn * wloc.min((stop - t).abs());
            if (stop - t2) * sgn < 1e-12 {
                t2 = stop;
            }
            edges.push(t2);
            t = t2;
            wloc = base.min(wloc * 2.0);
        }
    }
    edges.sort_by(|a, b| a.partial_cmp(b).unwrap());
    edges.dedup_by(|a, b| (*a - *b).abs() < 1e-15);
    edges
}
