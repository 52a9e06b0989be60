//! Thomas algorithm for tridiagonal systems.

use crate::error::{Error, Result};

/// Smallest pivot magnitude accepted before a system is declared singular.
pub const PIVOT_FLOOR: f64 = 1e-300;

/// Solves `T x = rhs` where row `i` of `T` is `lower[i] x[i−1] + diag[i] x[i] + upper[i] x[i+1]`
/// (`lower[0]` and `upper[n−1]` are ignored).
pub fn solve(lower: &[f64], diag: &[f64], upper: &[f64], rhs: &[f64]) -> Result<Vec<f64>> {
    let n = diag.len();
    debug_assert!(lower.len() == n && upper.len() == n && rhs.len() == n);
    let mut c = vec![0.0; n];
    let mut x = vec![0.0; n];
    let mut pivot = diag[0];
    if pivot.abs() < PIVOT_FLOOR || !pivot.is_finite() {
        return Err(Error::Singular { row: 0, pivot });
    }
    c[0] = upper[0] / pivot;
    x[0] = rhs[0] / pivot;
    for i in 1..n {
        pivot = diag[i] - lower[i] * c[i - 1];
        if pivot.abs() < PIVOT_FLOOR || !pivot.is_finite() {
            return Err(Error::Singular { row: i, pivot });
        }
        c[i] = upper[i] / pivot;
        x[i] = (rhs[i] - lower[i] * x[i - 1]) / pivot;
    }
    for i in (0..n - 1).rev() {
        x[i] -= c[i] * x[i + 1];
    }
    Ok(x)
}

/// Solves `Tᵀ x = rhs` for the same band layout.
pub fn solve_transposed(lower: &[f64], diag: &[f64], upper: &[f64], rhs: &[f64]) -> Result<Vec<f64>> {
    let n = diag.len();
    // Row i of Tᵀ: upper[i−1] x[i−1] + diag[i] x[i] + lower[i+1] x[i+1].
    let mut lo = vec![0.0; n];
    let mut up = vec![0.0; n];
    for i in 0..n {
        if i > 0 {
            lo[i] = upper[i - 1];
        }
        if i + 1 < n {
            up[i] = lower[i + 1];
        }
    }
    solve(&lo, diag, &up, rhs)
}

/// `T x`
pub fn apply(lower: &[f64], diag: &[f64], upper: &[f64], x: &[f64]) -> Vec<f64> {
    let n = diag.len();
    (0..n)
        .map(|i| {
            let mut v = diag[i] * x[i];
            if i > 0 {
                v += lower[i] * x[i - 1];
            }
            if i + 1 < n {
                v += upper[i] * x[i + 1];
            }
            v
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn solves_laplacian() {
        let n = 50;
        let lower = vec![-1.0; n];
        let diag = vec![2.5; n];
        let upper = vec![-1.0; n];
        let x_true: Vec<f64> = (0..n).map(|i| (i as f64 * 0.3).sin()).collect();
        let rhs = apply(&lower, &diag, &upper, &x_true);
        let x = solve(&lower, &diag, &upper, &rhs).unwrap();
        for (a, b) in x.iter().zip(&x_true) {
            assert!((a - b).abs() < 1e-13);
        }
    }

    #[test]
    fn transposed_solve_inverts_transpose() {
        let n = 20;
        let lower: Vec<f64> = (0..n).map(|i| -0.5 - i as f64 * 0.01).collect();
        let diag = vec![3.0; n];
        let upper: Vec<f64> = (0..n).map(|i| -1.0 + i as f64 * 0.02).collect();
        let y: Vec<f64> = (0..n).map(|i| 1.0 + i as f64).collect();
        let x = solve_transposed(&lower, &diag, &upper, &y).unwrap();
        // yᵀ T⁻¹ e_j = xᵀ e_j... check via (Tᵀx)·z = x·(Tz) for random z.
        let z: Vec<f64> = (0..n).map(|i| (i as f64).cos()).collect();
        let tz = apply(&lower, &diag, &upper, &z);
        let lhs: f64 = x.iter().zip(&tz).map(|(a, b)| a * b).sum();
        let rhs: f64 = y.iter().zip(&z).map(|(a, b)| a * b).sum();
        assert!((lhs - rhs).abs() < 1e-10 * rhs.abs());
    }

    #[test]
    fn zero_pivot_is_reported() {
        let r = solve(&[0.0, 0.0], &[0.0, 1.0], &[0.0, 0.0], &[1.0, 1.0]);
        assert!(matches!(r, Err(Error::Singular { row: 0, .. })));
    }
}
