//! Nonnegative least squares by the Lawson–Hanson active-set method.

use ndarray::ArrayView2;

use super::CombinerError;
use crate::linalg::lstsq_columns;

#[derive(Debug, Clone, PartialEq)]
pub struct NnlsSolution {
    pub coefficients: Vec<f64>,
    pub residual_norm: f64,
    /// Indices with strictly positive coefficients.
    pub active_set: Vec<usize>,
    /// Set when every coefficient is zero.
    pub all_zero: bool,
}

impl NnlsSolution {
    /// `Aᵀ(Ax − b)`, half the gradient of the squared residual.
    pub fn gradient(&self, a: ArrayView2<'_, f64>, b: &[f64]) -> Vec<f64> {
        gradient(a, b, &self.coefficients)
    }
}

fn residual(a: ArrayView2<'_, f64>, b: &[f64], x: &[f64]) -> Vec<f64> {
    a.rows()
        .into_iter()
        .zip(b)
        .map(|(row, bi)| row.iter().zip(x).map(|(u, v)| u * v).sum::<f64>() - bi)
        .collect()
}

fn gradient(a: ArrayView2<'_, f64>, b: &[f64], x: &[f64]) -> Vec<f64> {
    let r = residual(a, b, x);
    a.columns()
        .into_iter()
        .map(|col| col.iter().zip(&r).map(|(u, v)| u * v).sum())
        .collect()
}

/// `min ‖A x − b‖²` subject to `x ≥ 0`.
pub fn nnls(a: ArrayView2<'_, f64>, b: &[f64]) -> Result<NnlsSolution, CombinerError> {
    let (n, k) = a.dim();
    if n == 0 || k == 0 {
        return Err(CombinerError::EmptyInput);
    }
    if b.len() != n {
        return Err(CombinerError::LengthMismatch {
            expected: n,
            got: b.len(),
        });
    }
    if a.iter().chain(b).any(|v| !v.is_finite()) {
        return Err(CombinerError::NonFinite);
    }
    let columns: Vec<Vec<f64>> = a.columns().into_iter().map(|c| c.to_vec()).collect();
    let col_scale = columns
        .iter()
        .map(|c| c.iter().map(|v| v * v).sum::<f64>().sqrt())
        .fold(0.0, f64::max);
    let b_scale = b.iter().map(|v| v * v).sum::<f64>().sqrt();
    let tol = 1e-12 * (col_scale * b_scale).max(1e-300) * n as f64;

    let mut x = vec![0.0; k];
    let mut passive = vec![false; k];
    // columns that cannot enter usefully are skipped until the passive set shrinks
    let mut excluded = vec![false; k];
    let solve = |passive: &[bool]| -> Option<Vec<f64>> {
        let idx: Vec<usize> = (0..k).filter(|&j| passive[j]).collect();
        let cols: Vec<Vec<f64>> = idx.iter().map(|&j| columns[j].clone()).collect();
        let sol = lstsq_columns(&cols, b)?;
        let mut z = vec![0.0; k];
        for (&j, v) in idx.iter().zip(sol) {
            z[j] = v;
        }
        Some(z)
    };

    let max_outer = 3 * k;
    let mut outer = 0;
    loop {
        let w: Vec<f64> = gradient(a, b, &x).into_iter().map(|g| -g).collect();
        let entering = (0..k)
            .filter(|&j| !passive[j] && !excluded[j] && w[j] > tol)
            .max_by(|&i, &j| w[i].total_cmp(&w[j]).then(j.cmp(&i)));
        let Some(t) = entering else {
            break;
        };
        outer += 1;
        if outer > max_outer {
            return Err(CombinerError::MaxIterations(max_outer));
        }
        passive[t] = true;
        let mut z = match solve(&passive) {
            Some(z) if z[t] > 0.0 => z,
            _ => {
                passive[t] = false;
                excluded[t] = true;
                continue;
            }
        };
        let mut inner = 0;
        while (0..k).any(|j| passive[j] && z[j] <= 0.0) {
            inner += 1;
            if inner > 3 * k {
                return Err(CombinerError::MaxIterations(max_outer));
            }
            let mut step = f64::INFINITY;
            for j in (0..k).filter(|&j| passive[j] && z[j] <= 0.0) {
                step = step.min(x[j] / (x[j] - z[j]));
            }
            for j in 0..k {
                x[j] += step * (z[j] - x[j]);
            }
            for j in 0..k {
                if passive[j] && x[j] <= 1e-15 * x.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1e-300) {
                    passive[j] = false;
                    x[j] = 0.0;
                    excluded.fill(false);
                }
            }
            z = match solve(&passive) {
                Some(z) => z,
                None => return Err(CombinerError::MaxIterations(max_outer)),
            };
        }
        x = z;
    }

    let r = residual(a, b, &x);
    let active_set: Vec<usize> = (0..k).filter(|&j| x[j] > 0.0).collect();
    Ok(NnlsSolution {
        all_zero: active_set.is_empty(),
        residual_norm: r.iter().map(|v| v * v).sum::<f64>().sqrt(),
        coefficients: x,
        active_set,
    })
}
