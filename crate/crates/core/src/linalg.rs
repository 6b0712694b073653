//! Small dense solvers used by IRLS and NNLS.

/// Solve `A x = b` for symmetric positive definite `A` (row-major `n × n`).
/// Returns `None` if `A` is not numerically positive definite.
pub(crate) fn cholesky_solve(a: &[f64], b: &[f64], n: usize) -> Option<Vec<f64>> {
    debug_assert_eq!(a.len(), n * n);
    debug_assert_eq!(b.len(), n);
    let mut l = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..=i {
            let mut s = a[i * n + j];
            for k in 0..j {
                s -= l[i * n + k] * l[j * n + k];
            }
            if i == j {
                if !(s > 0.0) || !s.is_finite() {
                    return None;
                }
                l[i * n + i] = s.sqrt();
            } else {
                l[i * n + j] = s / l[j * n + j];
            }
        }
    }
    let mut y = vec![0.0; n];
    for i in 0..n {
        let mut s = b[i];
        for k in 0..i {
            s -= l[i * n + k] * y[k];
        }
        y[i] = s / l[i * n + i];
    }
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        let mut s = y[i];
        for k in i + 1..n {
            s -= l[k * n + i] * x[k];
        }
        x[i] = s / l[i * n + i];
    }
    Some(x)
}

/// SPD solve with escalating diagonal jitter when the plain factorization fails.
pub(crate) fn cholesky_solve_jittered(a: &[f64], b: &[f64], n: usize) -> Option<Vec<f64>> {
    if let Some(x) = cholesky_solve(a, b, n) {
        return Some(x);
    }
    let scale = (0..n).map(|i| a[i * n + i].abs()).fold(0.0, f64::max).max(1e-300);
    let mut jitter = scale * 1e-12;
    for _ in 0..12 {
        let mut aj = a.to_vec();
        for i in 0..n {
            aj[i * n + i] += jitter;
        }
        if let Some(x) = cholesky_solve(&aj, b, n) {
            return Some(x);
        }
        jitter *= 10.0;
    }
    None
}

/// Least squares `min ‖A x − b‖` by Householder QR, `A` given as columns of
/// equal length `m ≥ columns.len()`. Returns `None` when a column is
/// numerically dependent on the previous ones.
pub(crate) fn lstsq_columns(columns: &[Vec<f64>], b: &[f64]) -> Option<Vec<f64>> {
    let k = columns.len();
    let m = b.len();
    if k == 0 {
        return Some(Vec::new());
    }
    if m < k {
        return None;
    }
    let mut a: Vec<Vec<f64>> = columns.to_vec();
    let mut rhs = b.to_vec();
    let mut diag = vec![0.0; k];
    for j in 0..k {
        let col_norm_full: f64 = a[j].iter().map(|v| v * v).sum::<f64>().sqrt();
        let norm: f64 = a[j][j..].iter().map(|v| v * v).sum::<f64>().sqrt();
        let orig_norm: f64 = columns[j].iter().map(|v| v * v).sum::<f64>().sqrt();
        if !(norm > 1e-10 * orig_norm.max(col_norm_full)) || orig_norm == 0.0 {
            return None;
        }
        let alpha = if a[j][j] > 0.0 { -norm } else { norm };
        // v = x - alpha e1, stored in place
        let mut v: Vec<f64> = a[j][j..].to_vec();
        v[0] -= alpha;
        let vnorm2: f64 = v.iter().map(|x| x * x).sum();
        diag[j] = alpha;
        if vnorm2 > 0.0 {
            for col in a.iter_mut().skip(j + 1) {
                let dot: f64 = v.iter().zip(&col[j..]).map(|(x, y)| x * y).sum();
                let f = 2.0 * dot / vnorm2;
                for (c, vi) in col[j..].iter_mut().zip(&v) {
                    *c -= f * vi;
                }
            }
            let dot: f64 = v.iter().zip(&rhs[j..]).map(|(x, y)| x * y).sum();
            let f = 2.0 * dot / vnorm2;
            for (c, vi) in rhs[j..].iter_mut().zip(&v) {
                *c -= f * vi;
            }
        }
    }
    let mut x = vec![0.0; k];
    for i in (0..k).rev() {
        let mut s = rhs[i];
        for j in i + 1..k {
            s -= a[j][i] * x[j];
        }
        x[i] = s / diag[i];
    }
    if x.iter().all(|v| v.is_finite()) {
        Some(x)
    } else {
        None
    }
}
