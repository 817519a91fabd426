//! Small adaptive Gauss–Legendre quadrature over straight segments in ℂ.

use num_complex::Complex64;

/// Gauss–Legendre nodes and weights on (-1, 1), computed by Newton iteration
/// on the Legendre polynomial.
pub(crate) fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n {
        // Initial guess (Chebyshev-like).
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        for _ in 0..100 {
            // Evaluate P_n and P_n' by the three-term recurrence.
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            let dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        nodes[i] = x;
        let (mut p0, mut p1) = (1.0, x);
        for k in 2..=n {
            let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
            p0 = p1;
            p1 = p2;
        }
        let dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
        weights[i] = 2.0 / ((1.0 - x * x) * dp * dp);
    }
    (nodes, weights)
}

/// Integrates `g` along the straight segment from `a` to `b`, doubling the
/// panel count until two refinements agree to `tol` (relative to 1 + |I|).
pub(crate) fn integrate_segment<F>(g: F, a: Complex64, b: Complex64, tol: f64) -> Complex64
where
    F: Fn(Complex64) -> Complex64,
{
    let (nodes, weights) = gauss_legendre(24);
    let eval = |panels: usize| -> Complex64 {
        let mut total = Complex64::new(0.0, 0.0);
        for p in 0..panels {
            let t0 = p as f64 / panels as f64;
            let t1 = (p + 1) as f64 / panels as f64;
            let pa = a + (b - a) * t0;
            let pb = a + (b - a) * t1;
            let half = (pb - pa) * 0.5;
            let mid = (pa + pb) * 0.5;
            let mut acc = Complex64::new(0.0, 0.0);
            for (x, w) in nodes.iter().zip(weights.iter()) {
                acc += g(mid + half * *x) * *w;
            }
            total += acc * half;
        }
        total
    };
    let mut prev = eval(1);
    for panels in [2usize, 4, 8, 16, 32, 64] {
        let cur = eval(panels);
        if (cur - prev).norm() <= tol * (1.0 + cur.norm()) {
            return cur;
        }
        prev = cur;
    }
    prev
}

/// Real-valued convenience wrapper.
pub(crate) fn integrate_real<F>(g: F, a: f64, b: f64, tol: f64) -> f64
where
    F: Fn(f64) -> f64,
{
    integrate_segment(
        |z| Complex64::new(g(z.re), 0.0),
        Complex64::new(a, 0.0),
        Complex64::new(b, 0.0),
        tol,
    )
    .re
}
