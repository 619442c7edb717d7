//! Gauss–Legendre nodes and weights (Newton on the Legendre recurrence),
//! plus tensor-grid integration over a box. Desk-scale verification tool,
//! not a PDE solver.

use alloc::vec::Vec;

use crate::float;

/// Nodes and weights on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1);
    let mut nodes = alloc::vec![0.0; n];
    let mut weights = alloc::vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        // Chebyshev-like initial guess
        let mut x = float::cos(core::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5));
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre_and_derivative(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if float::abs(dx) < 1e-15 {
                break;
            }
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

fn legendre_and_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// Tensor-product Gauss–Legendre integration of `f` over a box, `n` nodes
/// per axis. `f` returning `None` (out of domain) aborts with `None`.
pub fn integrate_box<F>(bounds: &[[f64; 2]], n: usize, mut f: F) -> Option<f64>
where
    F: FnMut(&[f64]) -> Option<f64>,
{
    let dim = bounds.len();
    let (nodes, weights) = gauss_legendre(n);
    let mut point = alloc::vec![0.0; dim];
    let mut index = alloc::vec![0usize; dim];
    let mut total = 0.0;
    loop {
        let mut w = 1.0;
        for d in 0..dim {
            let [lo, hi] = bounds[d];
            let half = 0.5 * (hi - lo);
            point[d] = lo + half * (nodes[index[d]] + 1.0);
            w *= half * weights[index[d]];
        }
        total += w * f(&point)?;
        // odometer increment
        let mut d = 0;
        loop {
            if d == dim {
                return Some(total);
            }
            index[d] += 1;
            if index[d] < n {
                break;
            }
            index[d] = 0;
            d += 1;
        }
    }
}
