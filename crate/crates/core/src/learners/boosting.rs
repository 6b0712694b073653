//! Gradient boosting with depth-one trees under logistic loss.

use super::logistic::sigmoid;
use super::tree::ColumnData;

#[derive(Debug, Clone, Copy)]
struct Stump {
    feature: usize,
    threshold: f64,
    left: f64,
    right: f64,
}

#[derive(Debug, Clone)]
pub struct BoostedStumps {
    init: f64,
    shrinkage: f64,
    stumps: Vec<Stump>,
}

fn midpoint(a: f64, b: f64) -> f64 {
    let m = a + (b - a) / 2.0;
    if m >= b || m < a {
        a
    } else {
        m
    }
}

impl BoostedStumps {
    pub(crate) fn fit(data: &ColumnData, y: &[u8], rounds: usize, shrinkage: f64, min_leaf: usize) -> Self {
        let n = y.len();
        let prev = y.iter().map(|&v| f64::from(v)).sum::<f64>() / n as f64;
        let prev = prev.clamp(1e-6, 1.0 - 1e-6);
        let init = (prev / (1.0 - prev)).ln();
        let mut f = vec![init; n];
        let mut stumps = Vec::with_capacity(rounds);
        let min_leaf = min_leaf.max(1);
        let mut g = vec![0.0; n];
        let mut h = vec![0.0; n];

        for _ in 0..rounds {
            for i in 0..n {
                let p = sigmoid(f[i]);
                g[i] = f64::from(y[i]) - p;
                h[i] = p * (1.0 - p);
            }
            let g_total: f64 = g.iter().sum();
            // least-squares fit of the stump to the residuals g
            let mut best: Option<(f64, usize, usize)> = None;
            for (feat, order) in data.order.iter().enumerate() {
                let col = &data.columns[feat];
                let mut gl = 0.0;
                for pos in 0..n - 1 {
                    let i = order[pos] as usize;
                    gl += g[i];
                    let nl = pos + 1;
                    let nr = n - nl;
                    if nl < min_leaf || nr < min_leaf {
                        continue;
                    }
                    if col[order[pos + 1] as usize] <= col[i] {
                        continue;
                    }
                    let gr = g_total - gl;
                    let gain = gl * gl / nl as f64 + gr * gr / nr as f64;
                    if best.is_none_or(|b| gain > b.0) {
                        best = Some((gain, feat, pos));
                    }
                }
            }
            let Some((_, feature, pos)) = best else {
                break;
            };
            let order = &data.order[feature];
            let col = &data.columns[feature];
            let (mut gl, mut hl) = (0.0, 0.0);
            for &i in &order[..=pos] {
                gl += g[i as usize];
                hl += h[i as usize];
            }
            let (gr, hr) = (g_total - gl, h.iter().sum::<f64>() - hl);
            let leaf = |gs: f64, hs: f64| if hs > 1e-12 { gs / hs } else { 0.0 };
            let stump = Stump {
                feature,
                threshold: midpoint(col[order[pos] as usize], col[order[pos + 1] as usize]),
                left: leaf(gl, hl),
                right: leaf(gr, hr),
            };
            for (i, fi) in f.iter_mut().enumerate() {
                *fi += shrinkage * stump.eval(|j| data.columns[j][i]);
            }
            stumps.push(stump);
        }
        Self {
            init,
            shrinkage,
            stumps,
        }
    }

    pub fn rounds(&self) -> usize {
        self.stumps.len()
    }

    pub fn predict_row(&self, row: impl Fn(usize) -> f64 + Copy) -> f64 {
        let f = self.init + self.shrinkage * self.stumps.iter().map(|s| s.eval(row)).sum::<f64>();
        sigmoid(f)
    }
}

impl Stump {
    fn eval(&self, row: impl Fn(usize) -> f64) -> f64 {
        if row(self.feature) <= self.threshold {
            self.left
        } else {
            self.right
        }
    }
}
