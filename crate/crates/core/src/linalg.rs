//! Small dense linear algebra: row-major square solves and singular values.

use alloc::vec::Vec;

use crate::error::{Error, Result};

/// Solves `a · x = b` for square row-major `a` by Gaussian elimination with
/// partial pivoting.
pub fn solve(mut a: Vec<f64>, mut b: Vec<f64>) -> Result<Vec<f64>> {
    let n = b.len();
    debug_assert_eq!(a.len(), n * n);
    let scale = a.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if scale == 0.0 && n > 0 {
        return Err(Error::SingularJacobian);
    }
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&i, &j| a[i * n + col].abs().total_cmp(&a[j * n + col].abs()))
            .unwrap();
        if a[pivot * n + col].abs() <= 1e-14 * scale {
            return Err(Error::SingularJacobian);
        }
        if pivot != col {
            for k in 0..n {
                a.swap(pivot * n + k, col * n + k);
            }
            b.swap(pivot, col);
        }
        let d = a[col * n + col];
        for row in col + 1..n {
            let f = a[row * n + col] / d;
            if f == 0.0 {
                continue;
            }
            for k in col..n {
                a[row * n + k] -= f * a[col * n + k];
            }
            b[row] -= f * b[col];
        }
    }
    let mut x = alloc::vec![0.0; n];
    for row in (0..n).rev() {
        let mut acc = b[row];
        for k in row + 1..n {
            acc -= a[row * n + k] * x[k];
        }
        x[row] = acc / a[row * n + row];
    }
    Ok(x)
}

/// Singular values of a row-major `rows × cols` matrix, descending.
///
/// One-sided Jacobi on the columns of the matrix (or its transpose when it
/// has more columns than rows).
#[allow(clippy::needless_range_loop)]
pub fn singular_values(a: &[f64], rows: usize, cols: usize) -> Vec<f64> {
    debug_assert_eq!(a.len(), rows * cols);
    // work on column vectors of length `len`, `k` of them, with len >= k
    let (len, k, cols_of): (usize, usize, Vec<Vec<f64>>) = if rows >= cols {
        (
            rows,
            cols,
            (0..cols)
                .map(|j| (0..rows).map(|i| a[i * cols + j]).collect())
                .collect(),
        )
    } else {
        (
            cols,
            rows,
            (0..rows).map(|i| a[i * cols..(i + 1) * cols].to_vec()).collect(),
        )
    };
    let mut v = cols_of;
    for _sweep in 0..60 {
        let mut rotated = false;
        for p in 0..k {
            for q in p + 1..k {
                let (mut alpha, mut beta, mut gamma) = (0.0, 0.0, 0.0);
                for i in 0..len {
                    alpha += v[p][i] * v[p][i];
                    beta += v[q][i] * v[q][i];
                    gamma += v[p][i] * v[q][i];
                }
                if gamma == 0.0 || gamma.abs() <= 1e-15 * libm::sqrt(alpha * beta) {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + libm::sqrt(1.0 + zeta * zeta));
                let t = if zeta == 0.0 { 1.0 } else { t };
                let c = 1.0 / libm::sqrt(1.0 + t * t);
                let s = c * t;
                for i in 0..len {
                    let (vp, vq) = (v[p][i], v[q][i]);
                    v[p][i] = c * vp - s * vq;
                    v[q][i] = s * vp + c * vq;
                }
            }
        }
        if !rotated {
            break;
        }
    }
    let mut sv: Vec<f64> = v
        .iter()
        .map(|col| libm::sqrt(col.iter().map(|x| x * x).sum::<f64>()))
        .collect();
    sv.sort_by(|a, b| b.total_cmp(a));
    sv
}

/// Numerical rank: singular values above `rel_tol · σ_max`.
pub fn numerical_rank(singular: &[f64], rel_tol: f64) -> usize {
    let top = singular.first().copied().unwrap_or(0.0);
    if top == 0.0 {
        return 0;
    }
    singular.iter().filter(|&&s| s > rel_tol * top).count()
}
