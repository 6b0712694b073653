use ndarray::ArrayView2;

use super::logistic::sigmoid;

/// Linear soft-margin classifier trained on the primal hinge objective
/// `½‖w‖² + C·Σ max(0, 1 − yᵢ(w·xᵢ + b))` by full-batch subgradient descent.
/// The score is the margin passed through the logistic function.
#[derive(Debug, Clone)]
pub struct LinearSvm {
    weights: Vec<f64>,
    bias: f64,
    pub objective: f64,
}

fn primal(x: ArrayView2<'_, f64>, signs: &[f64], w: &[f64], b: f64, c: f64) -> f64 {
    let hinge: f64 = x
        .rows()
        .into_iter()
        .zip(signs)
        .map(|(row, &s)| {
            let m = b + row.iter().zip(w).map(|(a, b)| a * b).sum::<f64>();
            (1.0 - s * m).max(0.0)
        })
        .sum();
    0.5 * w.iter().map(|v| v * v).sum::<f64>() + c * hinge
}

impl LinearSvm {
    pub(crate) fn fit(x: ArrayView2<'_, f64>, y: &[u8], c: f64, iterations: usize) -> Self {
        let (n, p) = x.dim();
        let signs: Vec<f64> = y.iter().map(|&v| if v == 1 { 1.0 } else { -1.0 }).collect();
        let mut w = vec![0.0; p];
        let mut b = 0.0;
        let mut best = (w.clone(), b, primal(x, &signs, &w, b, c));
        // step normalised by C·n so the first move has unit scale
        let scale = 1.0 / (c * n as f64);
        let mut gw = vec![0.0; p];
        for t in 1..=iterations {
            gw.copy_from_slice(&w);
            let mut gb = 0.0;
            for (row, &s) in x.rows().into_iter().zip(&signs) {
                let m = b + row.iter().zip(&w).map(|(a, b)| a * b).sum::<f64>();
                if s * m < 1.0 {
                    for (g, &v) in gw.iter_mut().zip(row.iter()) {
                        *g -= c * s * v;
                    }
                    gb -= c * s;
                }
            }
            let eta = scale / (t as f64).sqrt();
            for (wj, g) in w.iter_mut().zip(&gw) {
                *wj -= eta * g;
            }
            b -= eta * gb;
            let obj = primal(x, &signs, &w, b, c);
            if obj < best.2 {
                best = (w.clone(), b, obj);
            }
        }
        Self {
            weights: best.0,
            bias: best.1,
            objective: best.2,
        }
    }

    pub fn margin(&self, x: ArrayView2<'_, f64>) -> Vec<f64> {
        x.rows()
            .into_iter()
            .map(|row| self.bias + row.iter().zip(&self.weights).map(|(a, b)| a * b).sum::<f64>())
            .collect()
    }

    pub fn predict(&self, x: ArrayView2<'_, f64>) -> Vec<f64> {
        self.margin(x).into_iter().map(sigmoid).collect()
    }
}
