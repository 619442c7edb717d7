//! Small dense linear algebra: column-pivoted QR for numerical rank and
//! pivot selection, LU with partial pivoting for solve / det / inverse.
//!
//! The matrices here are tiny (frames and bracket evaluations, at most a few
//! dozen columns), so plain row-major `Vec<f64>` kernels are used.

use alloc::vec;
use alloc::vec::Vec;

use crate::float;

/// Row-major dense matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Mat {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Mat {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Mat {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Mat::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    pub fn from_columns(rows: usize, columns: &[Vec<f64>]) -> Self {
        let mut m = Mat::zeros(rows, columns.len());
        for (j, c) in columns.iter().enumerate() {
            assert_eq!(c.len(), rows, "column length mismatch");
            for i in 0..rows {
                m[(i, j)] = c[i];
            }
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.rows).map(|i| self[(i, j)]).collect()
    }

    pub fn transpose(&self) -> Mat {
        let mut t = Mat::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t[(j, i)] = self[(i, j)];
            }
        }
        t
    }

    pub fn matmul(&self, other: &Mat) -> Mat {
        assert_eq!(self.cols, other.rows);
        let mut out = Mat::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)];
                if a == 0.0 {
                    continue;
                }
                for j in 0..other.cols {
                    out[(i, j)] += a * other[(k, j)];
                }
            }
        }
        out
    }

    pub fn matvec(&self, v: &[f64]) -> Vec<f64> {
        assert_eq!(self.cols, v.len());
        let mut out = vec![0.0; self.rows];
        for i in 0..self.rows {
            let mut acc = 0.0;
            for j in 0..self.cols {
                acc += self[(i, j)] * v[j];
            }
            out[i] = acc;
        }
        out
    }
}

impl core::ops::Index<(usize, usize)> for Mat {
    type Output = f64;
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.data[i * self.cols + j]
    }
}

impl core::ops::IndexMut<(usize, usize)> for Mat {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        &mut self.data[i * self.cols + j]
    }
}

/// Result of a column-pivoted QR factorization, reduced to what the callers
/// need: the pivot order and the diagonal magnitudes of `R`.
#[derive(Debug, Clone)]
pub struct PivotedQr {
    pub pivots: Vec<usize>,
    pub r_diag: Vec<f64>,
}

impl PivotedQr {
    /// Numerical rank with threshold `tol` relative to the largest diagonal.
    pub fn rank(&self, tol: f64) -> usize {
        let max = self.r_diag.first().copied().unwrap_or(0.0);
        if max == 0.0 {
            return 0;
        }
        self.r_diag.iter().take_while(|d| **d > tol * max).count()
    }
}

/// Householder QR with greedy column pivoting on remaining column norms.
pub fn pivoted_qr(a: &Mat) -> PivotedQr {
    let m = a.rows();
    let n = a.cols();
    let steps = m.min(n);
    let mut work = a.clone();
    let mut pivots: Vec<usize> = (0..n).collect();
    let mut r_diag = Vec::with_capacity(steps);

    for k in 0..steps {
        // pivot: remaining column with the largest trailing norm
        let mut best = k;
        let mut best_norm = trailing_norm(&work, k, k);
        for j in (k + 1)..n {
            let nj = trailing_norm(&work, j, k);
            if nj > best_norm {
                best = j;
                best_norm = nj;
            }
        }
        if best != k {
            for i in 0..m {
                let t = work[(i, k)];
                work[(i, k)] = work[(i, best)];
                work[(i, best)] = t;
            }
            pivots.swap(k, best);
        }
        if best_norm == 0.0 {
            r_diag.push(0.0);
            continue;
        }
        // Householder reflection zeroing column k below the diagonal
        let alpha = if work[(k, k)] >= 0.0 {
            -best_norm
        } else {
            best_norm
        };
        let mut v: Vec<f64> = (k..m).map(|i| work[(i, k)]).collect();
        v[0] -= alpha;
        let vnorm2: f64 = v.iter().map(|x| x * x).sum();
        work[(k, k)] = alpha;
        for i in (k + 1)..m {
            work[(i, k)] = 0.0;
        }
        if vnorm2 > 0.0 {
            for j in (k + 1)..n {
                let mut dot = 0.0;
                for i in k..m {
                    dot += v[i - k] * work[(i, j)];
                }
                let scale = 2.0 * dot / vnorm2;
                for i in k..m {
                    work[(i, j)] -= scale * v[i - k];
                }
            }
        }
        r_diag.push(float::abs(alpha));
    }
    PivotedQr { pivots, r_diag }
}

fn trailing_norm(m: &Mat, col: usize, from_row: usize) -> f64 {
    let mut acc = 0.0;
    for i in from_row..m.rows() {
        acc += m[(i, col)] * m[(i, col)];
    }
    float::sqrt(acc)
}

/// Numerical rank of a matrix: column-pivoted QR, threshold `tol` relative
/// to the largest R diagonal entry.
pub fn rank(a: &Mat, tol: f64) -> usize {
    pivoted_qr(a).rank(tol)
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum LinalgError {
    #[error("singular matrix")]
    Singular,
}

/// LU decomposition with partial pivoting; panics on shape mismatch,
/// errors on exactly singular input.
pub struct Lu {
    n: usize,
    lu: Mat,
    perm: Vec<usize>,
    sign: f64,
}

impl Lu {
    pub fn new(a: &Mat) -> Result<Lu, LinalgError> {
        assert_eq!(a.rows(), a.cols(), "LU needs a square matrix");
        let n = a.rows();
        let mut lu = a.clone();
        let mut perm: Vec<usize> = (0..n).collect();
        let mut sign = 1.0;
        for k in 0..n {
            let mut piv = k;
            let mut best = float::abs(lu[(k, k)]);
            for i in (k + 1)..n {
                let v = float::abs(lu[(i, k)]);
                if v > best {
                    piv = i;
                    best = v;
                }
            }
            if best == 0.0 {
                return Err(LinalgError::Singular);
            }
            if piv != k {
                for j in 0..n {
                    let t = lu[(k, j)];
                    lu[(k, j)] = lu[(piv, j)];
                    lu[(piv, j)] = t;
                }
                perm.swap(k, piv);
                sign = -sign;
            }
            for i in (k + 1)..n {
                let f = lu[(i, k)] / lu[(k, k)];
                lu[(i, k)] = f;
                for j in (k + 1)..n {
                    lu[(i, j)] -= f * lu[(k, j)];
                }
            }
        }
        Ok(Lu { n, lu, perm, sign })
    }

    pub fn det(&self) -> f64 {
        let mut d = self.sign;
        for k in 0..self.n {
            d *= self.lu[(k, k)];
        }
        d
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        assert_eq!(b.len(), self.n);
        let mut x: Vec<f64> = self.perm.iter().map(|&i| b[i]).collect();
        for i in 1..self.n {
            for j in 0..i {
                x[i] -= self.lu[(i, j)] * x[j];
            }
        }
        for i in (0..self.n).rev() {
            for j in (i + 1)..self.n {
                x[i] -= self.lu[(i, j)] * x[j];
            }
            x[i] /= self.lu[(i, i)];
        }
        x
    }

    pub fn inverse(&self) -> Mat {
        let mut inv = Mat::zeros(self.n, self.n);
        let mut e = vec![0.0; self.n];
        for j in 0..self.n {
            e[j] = 1.0;
            let col = self.solve(&e);
            for i in 0..self.n {
                inv[(i, j)] = col[i];
            }
            e[j] = 0.0;
        }
        inv
    }
}

/// Determinant of a square matrix; 0.0 for exactly singular input.
pub fn det(a: &Mat) -> f64 {
    match Lu::new(a) {
        Ok(lu) => lu.det(),
        Err(_) => 0.0,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rank_thresholding() {
        // columns: e1, e2, e1+e2, 1e-12*e3
        let a = Mat::from_columns(
            3,
            &[
                vec![1.0, 0.0, 0.0],
                vec![0.0, 1.0, 0.0],
                vec![1.0, 1.0, 0.0],
                vec![0.0, 0.0, 1e-12],
            ],
        );
        assert_eq!(rank(&a, 1e-9), 2);
        assert_eq!(rank(&a, 1e-14), 3);
    }

    #[test]
    fn qr_pivot_order_prefers_large_columns() {
        let a = Mat::from_columns(2, &[vec![1e-3, 0.0], vec![5.0, 1.0]]);
        let qr = pivoted_qr(&a);
        assert_eq!(qr.pivots[0], 1);
    }

    #[test]
    fn lu_solve_det_inverse() {
        let a = Mat::from_columns(
            3,
            &[
                vec![2.0, 1.0, 0.0],
                vec![1.0, 3.0, 1.0],
                vec![0.0, 1.0, 4.0],
            ],
        );
        let lu = Lu::new(&a).unwrap();
        // det by cofactor expansion: 2*(12-1) - 1*(4-0) + 0 = 18
        assert!((lu.det() - 18.0).abs() < 1e-12);
        let x = lu.solve(&[1.0, 2.0, 3.0]);
        let back = a.matvec(&x);
        for (bi, want) in back.iter().zip([1.0, 2.0, 3.0]) {
            assert!((bi - want).abs() < 1e-12);
        }
        let inv = lu.inverse();
        let prod = a.matmul(&inv);
        let id = Mat::identity(3);
        for i in 0..3 {
            for j in 0..3 {
                assert!((prod[(i, j)] - id[(i, j)]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn singular_matrix_rejected() {
        let a = Mat::from_columns(2, &[vec![1.0, 2.0], vec![2.0, 4.0]]);
        assert!(Lu::new(&a).is_err());
        assert_eq!(det(&a), 0.0);
    }
}
