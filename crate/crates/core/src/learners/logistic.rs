//! Main-effects logistic regression by IRLS, and the quadratic-spline additive
//! variant built on top of it.

use ndarray::{s, Array1, Array2, ArrayView2};

use crate::linalg::cholesky_solve_jittered;

#[derive(Debug, Clone, Copy)]
pub(crate) struct IrlsOptions {
    pub ridge: f64,
    pub max_iter: usize,
    pub tol: f64,
}

#[derive(Debug, Clone)]
pub struct LogisticModel {
    /// Intercept first.
    pub coefficients: Vec<f64>,
    pub converged: bool,
    pub iterations: usize,
}

pub(crate) fn sigmoid(eta: f64) -> f64 {
    if eta >= 0.0 {
        1.0 / (1.0 + (-eta).exp())
    } else {
        let e = eta.exp();
        e / (1.0 + e)
    }
}

fn softplus(eta: f64) -> f64 {
    if eta > 0.0 {
        eta + (-eta).exp().ln_1p()
    } else {
        eta.exp().ln_1p()
    }
}

fn linear_predictor(x: ArrayView2<'_, f64>, beta: &[f64]) -> Vec<f64> {
    x.rows()
        .into_iter()
        .map(|row| beta[0] + row.iter().zip(&beta[1..]).map(|(a, b)| a * b).sum::<f64>())
        .collect()
}

/// Penalized deviance: `2·(−loglik) + penalty`.
fn objective(eta: &[f64], y: &[u8], penalty: f64) -> f64 {
    let nll: f64 = eta
        .iter()
        .zip(y)
        .map(|(&e, &yi)| softplus(e) - f64::from(yi) * e)
        .sum();
    2.0 * nll + penalty
}

/// Newton–Raphson (IRLS) with step halving. Stops when the relative change
/// in penalized deviance drops below `tol`; if that never happens within
/// `max_iter` iterations the best iterate is returned with `converged = false`.
pub(crate) fn fit_irls(x: ArrayView2<'_, f64>, y: &[u8], opts: IrlsOptions) -> LogisticModel {
    let (n, p) = x.dim();
    let q = p + 1;
    let mut design = Array2::ones((n, q));
    design.slice_mut(s![.., 1..]).assign(&x);
    let ybar = y.iter().map(|&v| f64::from(v)).sum::<f64>() / n as f64;
    let mut beta = Array1::zeros(q);
    beta[0] = (ybar / (1.0 - ybar)).ln();
    if !beta[0].is_finite() {
        beta[0] = 0.0;
    }
    let penalized = |b: &Array1<f64>| b.iter().skip(1).map(|v| v * v).sum::<f64>();
    let mut eta = design.dot(&beta);
    let mut obj = objective(eta.as_slice().expect("contiguous"), y, opts.ridge * penalized(&beta));
    let mut converged = false;
    let mut iterations = 0;
    let mut weighted = Array2::zeros((n, q));

    for it in 0..opts.max_iter {
        iterations = it + 1;
        let mut resid = Array1::zeros(n);
        for i in 0..n {
            let mu = sigmoid(eta[i]);
            let w = (mu * (1.0 - mu)).max(1e-300);
            resid[i] = f64::from(y[i]) - mu;
            for (dst, &src) in weighted.row_mut(i).iter_mut().zip(design.row(i)) {
                *dst = src * w;
            }
        }
        let mut grad = design.t().dot(&resid);
        let mut hess = design.t().dot(&weighted);
        for a in 1..q {
            grad[a] -= opts.ridge * beta[a];
            hess[[a, a]] += opts.ridge;
        }
        let hess = hess.as_standard_layout().into_owned();
        let Some(step) = cholesky_solve_jittered(hess.as_slice().expect("standard layout"), grad.as_slice().expect("contiguous"), q) else {
            break;
        };
        let step = Array1::from(step);

        let mut t = 1.0;
        let mut accepted = None;
        for _ in 0..40 {
            let cand = &beta + &(&step * t);
            let cand_eta = design.dot(&cand);
            let cand_obj = objective(cand_eta.as_slice().expect("contiguous"), y, opts.ridge * penalized(&cand));
            if cand_obj.is_finite() && cand_obj <= obj {
                accepted = Some((cand, cand_eta, cand_obj));
                break;
            }
            t *= 0.5;
        }
        let Some((cand, cand_eta, cand_obj)) = accepted else {
            // no descent possible: at a numerical optimum
            converged = true;
            break;
        };
        let rel = (obj - cand_obj).abs() / (cand_obj.abs() + 0.1);
        beta = cand;
        eta = cand_eta;
        obj = cand_obj;
        if rel < opts.tol {
            converged = true;
            break;
        }
    }

    LogisticModel {
        coefficients: beta.to_vec(),
        converged,
        iterations,
    }
}

impl LogisticModel {
    pub fn predict(&self, x: ArrayView2<'_, f64>) -> Vec<f64> {
        linear_predictor(x, &self.coefficients)
            .into_iter()
            .map(sigmoid)
            .collect()
    }

    /// Gradient of the log-likelihood at the fitted coefficients.
    pub fn loglik_gradient(&self, x: ArrayView2<'_, f64>, y: &[u8]) -> Vec<f64> {
        let eta = linear_predictor(x, &self.coefficients);
        let mut g = vec![0.0; self.coefficients.len()];
        for (i, row) in x.rows().into_iter().enumerate() {
            let r = f64::from(y[i]) - sigmoid(eta[i]);
            g[0] += r;
            for (gj, &v) in g[1..].iter_mut().zip(row.iter()) {
                *gj += r * v;
            }
        }
        g
    }
}

/// Per-feature basis for the additive model.
#[derive(Debug, Clone)]
enum FeatureBasis {
    /// Two-level feature: the feature itself.
    Linear,
    /// `x`, `x²`, and `(x − knot)₊²` for each retained knot.
    Quadratic { knots: Vec<f64> },
}

/// Logistic regression on a fixed quadratic-spline basis per feature
/// (knots at the sample quartiles), fit without a smoothing penalty.
#[derive(Debug, Clone)]
pub struct QuadAdditiveModel {
    bases: Vec<FeatureBasis>,
    pub logistic: LogisticModel,
}

fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let frac = pos - lo as f64;
    sorted[lo] + frac * (sorted[hi] - sorted[lo])
}

impl QuadAdditiveModel {
    pub(crate) fn fit(x: ArrayView2<'_, f64>, y: &[u8], opts: IrlsOptions) -> Self {
        let mut bases = Vec::with_capacity(x.ncols());
        for col in x.columns() {
            let mut sorted = col.to_vec();
            sorted.sort_by(f64::total_cmp);
            let mut distinct = sorted.clone();
            distinct.dedup();
            if distinct.len() <= 2 {
                bases.push(FeatureBasis::Linear);
                continue;
            }
            let mut knots: Vec<f64> = Vec::new();
            for q in [0.25, 0.5, 0.75] {
                let k = quantile_sorted(&sorted, q);
                // a knot at or above the largest value gives an all-zero column
                let hinge_support = sorted.iter().filter(|&&v| v > k).count();
                if hinge_support >= 2 && knots.last().is_none_or(|&last| k > last) {
                    knots.push(k);
                }
            }
            bases.push(FeatureBasis::Quadratic { knots });
        }
        let design = expand(&bases, x);
        let logistic = fit_irls(design.view(), y, opts);
        Self { bases, logistic }
    }

    pub fn predict(&self, x: ArrayView2<'_, f64>) -> Vec<f64> {
        self.logistic.predict(expand(&self.bases, x).view())
    }

    pub fn basis_width(&self) -> usize {
        self.logistic.coefficients.len() - 1
    }
}

fn expand(bases: &[FeatureBasis], x: ArrayView2<'_, f64>) -> Array2<f64> {
    let width: usize = bases
        .iter()
        .map(|b| match b {
            FeatureBasis::Linear => 1,
            FeatureBasis::Quadratic { knots } => 2 + knots.len(),
        })
        .sum();
    let mut out = Array2::zeros((x.nrows(), width));
    for (i, row) in x.rows().into_iter().enumerate() {
        let mut c = 0;
        for (b, &v) in bases.iter().zip(row.iter()) {
            match b {
                FeatureBasis::Linear => {
                    out[[i, c]] = v;
                    c += 1;
                }
                FeatureBasis::Quadratic { knots } => {
                    out[[i, c]] = v;
                    out[[i, c + 1]] = v * v;
                    c += 2;
                    for &k in knots {
                        let h = (v - k).max(0.0);
                        out[[i, c]] = h * h;
                        c += 1;
                    }
                }
            }
        }
    }
    out
}
