//! Differencing of sampled signals and convergence-order estimates.

use alloc::vec::Vec;

/// Second-order derivative of `values` sampled at `grid`: central at interior
/// nodes, one-sided three-point at both ends. Grids need not be uniform.
///
/// Returns an empty vector for fewer than three nodes.
pub fn derivative(grid: &[f64], values: &[f64]) -> Vec<f64> {
    let n = grid.len();
    debug_assert_eq!(n, values.len());
    if n < 3 {
        return Vec::new();
    }
    let mut out = Vec::with_capacity(n);
    out.push(three_point(
        grid[0],
        [grid[0], grid[1], grid[2]],
        [values[0], values[1], values[2]],
    ));
    for k in 1..n - 1 {
        let (h0, h1) = (grid[k] - grid[k - 1], grid[k + 1] - grid[k]);
        if h0 == h1 {
            out.push((values[k + 1] - values[k - 1]) / (2.0 * h0));
        } else {
            out.push(three_point(
                grid[k],
                [grid[k - 1], grid[k], grid[k + 1]],
                [values[k - 1], values[k], values[k + 1]],
            ));
        }
    }
    out.push(three_point(
        grid[n - 1],
        [grid[n - 3], grid[n - 2], grid[n - 1]],
        [values[n - 3], values[n - 2], values[n - 1]],
    ));
    out
}

/// Derivative at `at` of the quadratic interpolating three samples.
fn three_point(at: f64, t: [f64; 3], v: [f64; 3]) -> f64 {
    let w0 = ((at - t[1]) + (at - t[2])) / ((t[0] - t[1]) * (t[0] - t[2]));
    let w1 = ((at - t[0]) + (at - t[2])) / ((t[1] - t[0]) * (t[1] - t[2]));
    let w2 = ((at - t[0]) + (at - t[1])) / ((t[2] - t[0]) * (t[2] - t[1]));
    w0 * v[0] + w1 * v[1] + w2 * v[2]
}

/// Least-squares slope of `log(error)` against `log(step)`.
///
/// Returns `None` with fewer than two usable (positive, finite) pairs.
pub fn observed_order(steps: &[f64], errors: &[f64]) -> Option<f64> {
    let pts: Vec<(f64, f64)> = steps
        .iter()
        .zip(errors)
        .filter(|(h, e)| **h > 0.0 && **e > 0.0 && e.is_finite())
        .map(|(h, e)| (libm::log(*h), libm::log(*e)))
        .collect();
    if pts.len() < 2 {
        return None;
    }
    let k = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / k;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / k;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    if sxx == 0.0 {
        return None;
    }
    Some(sxy / sxx)
}

/// `n + 1` uniform nodes on `[a, b]`, with the last node exactly `b`.
pub fn uniform(a: f64, b: f64, n: usize) -> Vec<f64> {
    let h = (b - a) / n as f64;
    (0..=n).map(|k| if k == n { b } else { a + h * k as f64 }).collect()
}

pub(crate) fn max_abs(values: impl IntoIterator<Item = f64>) -> f64 {
    values
        .into_iter()
        .fold(0.0, |m, v| if v.abs() > m || v.is_nan() { v.abs() } else { m })
}
