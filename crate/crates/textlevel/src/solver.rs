//! Small dense least-squares solver shared by the linear difficulty model
//! and the ensemble stacker.

use crate::{Error, Result};

#[derive(Debug, Clone)]
pub(crate) struct OlsSolution {
    pub intercept: f64,
    pub weights: Vec<f64>,
    pub ridge_fallback: bool,
}

/// Ordinary least squares with an intercept: minimize ||b + Xw - y||².
///
/// Solves the (m+1)-dimensional normal equations by Gaussian elimination
/// with partial pivoting. A singular or near-singular system (constant or
/// duplicated feature columns) is refit with a 1e-8 ridge term on the
/// non-intercept diagonal, and the fallback is reported to the caller.
pub(crate) fn ols_with_intercept(x: &[Vec<f64>], y: &[f64]) -> Result<OlsSolution> {
    let n = x.len();
    if n != y.len() {
        return Err(Error::LengthMismatch {
            left: n,
            right: y.len(),
        });
    }
    if n == 0 {
        return Err(Error::EmptyInput);
    }
    let m = x[0].len();
    for row in x {
        if row.len() != m {
            return Err(Error::LengthMismatch {
                left: m,
                right: row.len(),
            });
        }
        if row.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFiniteInput);
        }
    }
    if y.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFiniteInput);
    }

    // Normal equations over the design [1 | X]: A = DᵀD, rhs = Dᵀy.
    let dim = m + 1;
    let mut a = vec![vec![0.0; dim]; dim];
    let mut rhs = vec![0.0; dim];
    for (row, &yi) in x.iter().zip(y) {
        for i in 0..dim {
            let di = if i == 0 { 1.0 } else { row[i - 1] };
            rhs[i] += di * yi;
            for j in i..dim {
                let dj = if j == 0 { 1.0 } else { row[j - 1] };
                a[i][j] += di * dj;
            }
        }
    }
    for i in 0..dim {
        for j in 0..i {
            a[i][j] = a[j][i];
        }
    }

    if let Some(coef) = solve_system(a.clone(), rhs.clone()) {
        return Ok(OlsSolution {
            intercept: coef[0],
            weights: coef[1..].to_vec(),
            ridge_fallback: false,
        });
    }

    for (i, row) in a.iter_mut().enumerate().skip(1) {
        row[i] += 1e-8;
    }
    let coef = solve_system(a, rhs).ok_or(Error::SingularSystem)?;
    Ok(OlsSolution {
        intercept: coef[0],
        weights: coef[1..].to_vec(),
        ridge_fallback: true,
    })
}

/// Gaussian elimination with partial pivoting. Returns `None` when a pivot
/// falls below a scale-relative threshold.
fn solve_system(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    let scale = a
        .iter()
        .flatten()
        .fold(0.0f64, |acc, &v| acc.max(v.abs()));
    if scale == 0.0 {
        return None;
    }
    let tol = scale * 1e-12;

    for col in 0..n {
        let pivot_row = (col..n).max_by(|&i, &j| {
            a[i][col]
                .abs()
                .partial_cmp(&a[j][col].abs())
                .expect("finite entries")
        })?;
        if a[pivot_row][col].abs() < tol {
            return None;
        }
        a.swap(col, pivot_row);
        b.swap(col, pivot_row);
        for row in col + 1..n {
            let factor = a[row][col] / a[col][col];
            if factor == 0.0 {
                continue;
            }
            for k in col..n {
                a[row][k] -= factor * a[col][k];
            }
            b[row] -= factor * b[col];
        }
    }

    let mut solution = vec![0.0; n];
    for row in (0..n).rev() {
        let mut acc = b[row];
        for col in row + 1..n {
            acc -= a[row][col] * solution[col];
        }
        solution[row] = acc / a[row][row];
    }
    if solution.iter().any(|v| !v.is_finite()) {
        return None;
    }
    Some(solution)
}
