//! Small dense least squares via normal equations.

use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum LinalgError {
    #[error("matrix is singular to working precision")]
    Singular,
    #[error("need at least {needed} rows, got {got}")]
    Underdetermined { needed: usize, got: usize },
}

/// Above this 1-norm condition estimate of the normal matrix a warning is
/// logged.
pub const CONDITION_WARNING: f64 = 1e8;

/// Solves `A x = b` for square `A` (row-major, n×n) by Gaussian elimination
/// with partial pivoting.
pub fn solve(a: &[f64], b: &[f64]) -> Result<Vec<f64>, LinalgError> {
    let n = b.len();
    assert_eq!(a.len(), n * n);
    let mut m = a.to_vec();
    let mut x = b.to_vec();
    let scale = m.iter().fold(0.0f64, |s, v| s.max(v.abs()));
    for col in 0..n {
        let piv = (col..n)
            .max_by(|&i, &j| m[i * n + col].abs().total_cmp(&m[j * n + col].abs()))
            .unwrap();
        if m[piv * n + col].abs() <= scale * 1e-14 {
            return Err(LinalgError::Singular);
        }
        if piv != col {
            for k in 0..n {
                m.swap(piv * n + k, col * n + k);
            }
            x.swap(piv, col);
        }
        for r in col + 1..n {
            let f = m[r * n + col] / m[col * n + col];
            if f == 0.0 {
                continue;
            }
            for k in col..n {
                m[r * n + k] -= f * m[col * n + k];
            }
            x[r] -= f * x[col];
        }
    }
    for col in (0..n).rev() {
        let tail: f64 = (col + 1..n).map(|k| m[col * n + k] * x[k]).sum();
        x[col] = (x[col] - tail) / m[col * n + col];
    }
    Ok(x)
}

/// Inverse of a square matrix, column by column.
fn inverse(a: &[f64], n: usize) -> Result<Vec<f64>, LinalgError> {
    let mut inv = vec![0.0; n * n];
    for c in 0..n {
        let mut e = vec![0.0; n];
        e[c] = 1.0;
        let col = solve(a, &e)?;
        for r in 0..n {
            inv[r * n + c] = col[r];
        }
    }
    Ok(inv)
}

fn norm1(a: &[f64], n: usize) -> f64 {
    (0..n)
        .map(|c| (0..n).map(|r| a[r * n + c].abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// 1-norm condition number of a square matrix.
pub fn condition(a: &[f64], n: usize) -> Result<f64, LinalgError> {
    Ok(norm1(a, n) * norm1(&inverse(a, n)?, n))
}

#[derive(Debug, Clone, PartialEq)]
pub struct LstsqFit {
    pub coeffs: Vec<f64>,
    pub residual_rms: f64,
    pub condition: f64,
}

/// Minimizes `‖X c − y‖²` where `design` holds one regressor row per
/// observation, by forming and solving `XᵀX c = Xᵀy`.
pub fn least_squares(design: &[Vec<f64>], y: &[f64]) -> Result<LstsqFit, LinalgError> {
    let p = design.first().map_or(0, Vec::len);
    if design.len() < p || p == 0 {
        return Err(LinalgError::Underdetermined {
            needed: p.max(1),
            got: design.len(),
        });
    }
    let mut xtx = vec![0.0; p * p];
    let mut xty = vec![0.0; p];
    for (row, yi) in design.iter().zip(y) {
        for i in 0..p {
            xty[i] += row[i] * yi;
            for j in 0..p {
                xtx[i * p + j] += row[i] * row[j];
            }
        }
    }
    let coeffs = solve(&xtx, &xty)?;
    let cond = condition(&xtx, p)?;
    if cond > CONDITION_WARNING {
        log::warn!("least squares normal matrix is ill-conditioned (cond ≈ {cond:.2e})");
    }
    let ss: f64 = design
        .iter()
        .zip(y)
        .map(|(row, yi)| {
            let pred: f64 = row.iter().zip(&coeffs).map(|(a, c)| a * c).sum();
            (pred - yi).powi(2)
        })
        .sum();
    Ok(LstsqFit {
        coeffs,
        residual_rms: (ss / y.len() as f64).sqrt(),
        condition: cond,
    })
}
