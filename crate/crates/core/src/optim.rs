//! Derivative-free minimization: Nelder–Mead with a deterministic initial
//! simplex. Used by the shooting refinement, where Jacobians of the shot are
//! not worth assembling.

use alloc::vec::Vec;

/// Result of a Nelder–Mead run.
#[derive(Debug, Clone)]
pub struct NmResult {
    pub x: Vec<f64>,
    pub value: f64,
    pub iterations: usize,
}

/// Minimize `f` starting from `x0` with per-axis initial steps `scale`.
/// Points where `f` fails are treated as +inf, so the simplex backs away
/// from invalid regions on its own.
pub fn nelder_mead<F>(
    mut f: F,
    x0: &[f64],
    scale: &[f64],
    max_iter: usize,
    tol: f64,
) -> NmResult
where
    F: FnMut(&[f64]) -> Option<f64>,
{
    let n = x0.len();
    let mut eval = |x: &[f64]| f(x).unwrap_or(f64::INFINITY);

    let mut simplex: Vec<Vec<f64>> = Vec::with_capacity(n + 1);
    simplex.push(x0.to_vec());
    for i in 0..n {
        let mut v = x0.to_vec();
        v[i] += scale[i];
        simplex.push(v);
    }
    let mut values: Vec<f64> = simplex.iter().map(|x| eval(x)).collect();

    let (alpha, gamma, rho, sigma) = (1.0, 2.0, 0.5, 0.5);
    let mut iterations = 0;

    for _ in 0..max_iter {
        iterations += 1;
        // sort simplex by value (stable order keeps the run deterministic)
        let mut idx: Vec<usize> = (0..=n).collect();
        idx.sort_by(|&a, &b| values[a].partial_cmp(&values[b]).unwrap_or(core::cmp::Ordering::Equal));
        let sorted: Vec<Vec<f64>> = idx.iter().map(|&i| simplex[i].clone()).collect();
        let sorted_vals: Vec<f64> = idx.iter().map(|&i| values[i]).collect();
        simplex = sorted;
        values = sorted_vals;

        if values[n] - values[0] <= tol * (1.0 + values[0].abs()) {
            break;
        }

        // centroid of all but the worst
        let mut centroid = alloc::vec![0.0; n];
        for v in &simplex[..n] {
            for i in 0..n {
                centroid[i] += v[i] / n as f64;
            }
        }

        let worst = simplex[n].clone();
        let reflect: Vec<f64> = (0..n)
            .map(|i| centroid[i] + alpha * (centroid[i] - worst[i]))
            .collect();
        let fr = eval(&reflect);

        if fr < values[0] {
            let expand: Vec<f64> = (0..n)
                .map(|i| centroid[i] + gamma * (reflect[i] - centroid[i]))
                .collect();
            let fe = eval(&expand);
            if fe < fr {
                simplex[n] = expand;
                values[n] = fe;
            } else {
                simplex[n] = reflect;
                values[n] = fr;
            }
        } else if fr < values[n - 1] {
            simplex[n] = reflect;
            values[n] = fr;
        } else {
            let contract: Vec<f64> = (0..n)
                .map(|i| centroid[i] + rho * (worst[i] - centroid[i]))
                .collect();
            let fc = eval(&contract);
            if fc < values[n] {
                simplex[n] = contract;
                values[n] = fc;
            } else {
                // shrink toward the best vertex
                let best = simplex[0].clone();
                for v in simplex.iter_mut().skip(1) {
                    for i in 0..n {
                        v[i] = best[i] + sigma * (v[i] - best[i]);
                    }
                }
                for j in 1..=n {
                    values[j] = eval(&simplex[j]);
                }
            }
        }
    }

    let mut best = 0;
    for j in 1..=n {
        if values[j] < values[best] {
            best = j;
        }
    }
    NmResult {
        x: simplex[best].clone(),
        value: values[best],
        iterations,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quadratic_bowl() {
        let r = nelder_mead(
            |x| Some((x[0] - 1.5).powi(2) + 3.0 * (x[1] + 0.5).powi(2)),
            &[0.0, 0.0],
            &[0.5, 0.5],
            500,
            1e-14,
        );
        assert!((r.x[0] - 1.5).abs() < 1e-5);
        assert!((r.x[1] + 0.5).abs() < 1e-5);
    }

    #[test]
    fn invalid_regions_are_avoided() {
        // objective undefined for x < 0; minimum at x = 0.25
        let r = nelder_mead(
            |x| {
                if x[0] < 0.0 {
                    None
                } else {
                    Some((x[0] - 0.25).powi(2))
                }
            },
            &[1.0],
            &[0.3],
            300,
            1e-14,
        );
        assert!((r.x[0] - 0.25).abs() < 1e-5);
    }
}
