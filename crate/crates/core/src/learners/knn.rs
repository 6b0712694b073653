use ndarray::{Array2, ArrayView2};
use rayon::prelude::*;

/// k-nearest-neighbour positive fraction under Euclidean distance.
#[derive(Debug, Clone)]
pub struct KnnModel {
    train: Array2<f64>,
    labels: Vec<u8>,
    k: usize,
}

impl KnnModel {
    pub(crate) fn fit(x: ArrayView2<'_, f64>, y: &[u8], k: usize) -> Self {
        Self {
            train: x.to_owned(),
            labels: y.to_vec(),
            k: k.clamp(1, y.len()),
        }
    }

    pub fn k(&self) -> usize {
        self.k
    }

    /// Distance ties are broken by training-row index so the neighbour set
    /// is a function of the data alone.
    pub fn predict(&self, x: ArrayView2<'_, f64>) -> Vec<f64> {
        let rows: Vec<_> = x.rows().into_iter().collect();
        rows.par_iter()
            .map(|q| {
                let mut d: Vec<(f64, usize)> = self
                    .train
                    .rows()
                    .into_iter()
                    .enumerate()
                    .map(|(i, t)| {
                        let s: f64 = t.iter().zip(q.iter()).map(|(a, b)| (a - b) * (a - b)).sum();
                        (s, i)
                    })
                    .collect();
                let cmp = |a: &(f64, usize), b: &(f64, usize)| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1));
                if self.k < d.len() {
                    d.select_nth_unstable_by(self.k - 1, cmp);
                }
                let pos = d[..self.k].iter().filter(|&&(_, i)| self.labels[i] == 1).count();
                pos as f64 / self.k as f64
            })
            .collect()
    }
}
