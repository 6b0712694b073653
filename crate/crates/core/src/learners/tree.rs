//! Gini classification trees and their bootstrap ensembles.
//!
//! Trees are grown on presorted per-feature index lists: each node owns the
//! same contiguous segment in every list, a split is found by one scan per
//! candidate feature, and children are formed by a stable partition of every
//! list. Bootstrap replicates enter as integer row weights, so a forest never
//! copies the data.

use ndarray::ArrayView2;
use rand::seq::index;
use rand::Rng;
use rayon::prelude::*;

use crate::seed;

/// Column-major copy of the training features with per-feature sort orders.
pub(crate) struct ColumnData {
    pub columns: Vec<Vec<f64>>,
    pub order: Vec<Vec<u32>>,
}

impl ColumnData {
    pub fn new(x: ArrayView2<'_, f64>) -> Self {
        let columns: Vec<Vec<f64>> = x.columns().into_iter().map(|c| c.to_vec()).collect();
        let order = columns
            .iter()
            .map(|col| {
                let mut idx: Vec<u32> = (0..col.len() as u32).collect();
                idx.sort_by(|&a, &b| col[a as usize].total_cmp(&col[b as usize]).then(a.cmp(&b)));
                idx
            })
            .collect();
        Self { columns, order }
    }

    pub fn n(&self) -> usize {
        self.columns.first().map_or(0, Vec::len)
    }

    pub fn p(&self) -> usize {
        self.columns.len()
    }
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct TreeParams {
    /// `usize::MAX` for unlimited.
    pub max_depth: usize,
    pub min_leaf: usize,
    /// Features tried per split; `None` means all.
    pub mtry: Option<usize>,
}

#[derive(Debug, Clone, Copy)]
struct Node {
    /// `u32::MAX` marks a leaf.
    feature: u32,
    left: u32,
    right: u32,
    /// Split threshold for internal nodes, positive fraction for leaves.
    value: f64,
}

#[derive(Debug, Clone)]
pub struct Tree {
    nodes: Vec<Node>,
}

const LEAF: u32 = u32::MAX;

impl Tree {
    pub fn predict_row(&self, row: impl Fn(usize) -> f64) -> f64 {
        let mut i = 0usize;
        loop {
            let node = self.nodes[i];
            if node.feature == LEAF {
                return node.value;
            }
            i = if row(node.feature as usize) <= node.value {
                node.left as usize
            } else {
                node.right as usize
            };
        }
    }

    pub fn leaf_count(&self) -> usize {
        self.nodes.iter().filter(|n| n.feature == LEAF).count()
    }

    /// Depth of the deepest leaf (root alone has depth 0).
    pub fn depth(&self) -> usize {
        let mut best = 0;
        let mut stack = vec![(0usize, 0usize)];
        while let Some((i, d)) = stack.pop() {
            let n = self.nodes[i];
            if n.feature == LEAF {
                best = best.max(d);
            } else {
                stack.push((n.left as usize, d + 1));
                stack.push((n.right as usize, d + 1));
            }
        }
        best
    }

    /// Feature and threshold of the root split, if any.
    pub fn root_split(&self) -> Option<(usize, f64)> {
        let r = self.nodes[0];
        (r.feature != LEAF).then_some((r.feature as usize, r.value))
    }
}

fn midpoint(a: f64, b: f64) -> f64 {
    let m = a + (b - a) / 2.0;
    if m >= b || m < a {
        a
    } else {
        m
    }
}

struct Work {
    node: usize,
    start: usize,
    end: usize,
    depth: usize,
}

/// Grow one tree. `weights[i]` is the multiplicity of row `i` (0 = unused).
pub(crate) fn grow<R: Rng>(
    data: &ColumnData,
    labels: &[u8],
    weights: &[u32],
    params: TreeParams,
    rng: &mut R,
) -> Tree {
    let p = data.p();
    let mut lists: Vec<Vec<u32>> = data
        .order
        .iter()
        .map(|o| o.iter().copied().filter(|&i| weights[i as usize] > 0).collect())
        .collect();
    let m = lists.first().map_or(0, Vec::len);
    let mut goes_left = vec![false; data.n()];
    let mut scratch: Vec<u32> = Vec::with_capacity(m);
    let mut nodes = vec![Node {
        feature: LEAF,
        left: 0,
        right: 0,
        value: 0.0,
    }];
    let mut stack = vec![Work {
        node: 0,
        start: 0,
        end: m,
        depth: 0,
    }];
    let min_leaf = params.min_leaf.max(1) as f64;

    while let Some(w) = stack.pop() {
        let (mut n0, mut n1) = (0.0f64, 0.0f64);
        for &i in &lists[0][w.start..w.end] {
            let wt = f64::from(weights[i as usize]);
            if labels[i as usize] == 1 {
                n1 += wt;
            } else {
                n0 += wt;
            }
        }
        let total = n0 + n1;
        let leaf_value = if total > 0.0 { n1 / total } else { 0.0 };
        nodes[w.node].value = leaf_value;
        if n0 == 0.0 || n1 == 0.0 || w.depth >= params.max_depth || total < 2.0 * min_leaf {
            continue;
        }

        // With mtry < p the features are visited in random order and the scan
        // stops after mtry of them, unless none so far admits a split.
        let (candidates, tries): (Vec<usize>, usize) = match params.mtry {
            Some(k) if k < p => (index::sample(rng, p, p).into_vec(), k),
            _ => ((0..p).collect(), p),
        };

        let parent_score = (n0 * n0 + n1 * n1) / total;
        let mut best: Option<(f64, usize, usize, f64)> = None; // (score, feature, pos, threshold)
        for (tried, &f) in candidates.iter().enumerate() {
            if tried >= tries && best.is_some_and(|b| b.0 - parent_score > 1e-12 * total) {
                break;
            }
            let col = &data.columns[f];
            let seg = &lists[f][w.start..w.end];
            let (mut l0, mut l1) = (0.0f64, 0.0f64);
            for pos in 0..seg.len() - 1 {
                let i = seg[pos] as usize;
                let wt = f64::from(weights[i]);
                if labels[i] == 1 {
                    l1 += wt;
                } else {
                    l0 += wt;
                }
                let v = col[i];
                let next = col[seg[pos + 1] as usize];
                if next <= v {
                    continue;
                }
                let lw = l0 + l1;
                let rw = total - lw;
                if lw < min_leaf || rw < min_leaf {
                    continue;
                }
                let (r0, r1) = (n0 - l0, n1 - l1);
                let score = (l0 * l0 + l1 * l1) / lw + (r0 * r0 + r1 * r1) / rw;
                if best.is_none_or(|b| score > b.0) {
                    best = Some((score, f, pos, midpoint(v, next)));
                }
            }
        }

        let Some((score, feature, pos, threshold)) = best else {
            continue;
        };
        if score - parent_score <= 1e-12 * total {
            continue;
        }

        for &i in &lists[feature][w.start..=w.start + pos] {
            goes_left[i as usize] = true;
        }
        let left_len = pos + 1;
        for list in lists.iter_mut() {
            let seg = &mut list[w.start..w.end];
            scratch.clear();
            let mut write = 0;
            for r in 0..seg.len() {
                let i = seg[r];
                if goes_left[i as usize] {
                    seg[write] = i;
                    write += 1;
                } else {
                    scratch.push(i);
                }
            }
            debug_assert_eq!(write, left_len);
            seg[write..].copy_from_slice(&scratch);
        }
        for &i in &lists[0][w.start..w.start + left_len] {
            goes_left[i as usize] = false;
        }

        let left = nodes.len();
        let right = left + 1;
        let blank = Node {
            feature: LEAF,
            left: 0,
            right: 0,
            value: 0.0,
        };
        nodes.push(blank);
        nodes.push(blank);
        nodes[w.node] = Node {
            feature: feature as u32,
            left: left as u32,
            right: right as u32,
            value: threshold,
        };
        stack.push(Work {
            node: right,
            start: w.start + left_len,
            end: w.end,
            depth: w.depth + 1,
        });
        stack.push(Work {
            node: left,
            start: w.start,
            end: w.start + left_len,
            depth: w.depth + 1,
        });
    }
    Tree { nodes }
}

/// Averaged bootstrap trees (random forest when `mtry < p`, bagging otherwise).
#[derive(Debug, Clone)]
pub struct Forest {
    trees: Vec<Tree>,
}

impl Forest {
    pub(crate) fn fit(data: &ColumnData, labels: &[u8], trees: usize, params: TreeParams, seed: u64) -> Self {
        let n = data.n();
        let trees = (0..trees)
            .into_par_iter()
            .map(|t| {
                let mut rng = seed::rng(seed::derive_index(seed, t as u64));
                let mut weights = vec![0u32; n];
                for _ in 0..n {
                    weights[rng.random_range(0..n)] += 1;
                }
                grow(data, labels, &weights, params, &mut rng)
            })
            .collect();
        Self { trees }
    }

    pub fn len(&self) -> usize {
        self.trees.len()
    }

    pub fn is_empty(&self) -> bool {
        self.trees.is_empty()
    }

    /// Mean leaf fraction over trees, summed in tree order.
    pub fn predict_row(&self, row: impl Fn(usize) -> f64 + Copy) -> f64 {
        let s: f64 = self.trees.iter().map(|t| t.predict_row(row)).sum();
        s / self.trees.len() as f64
    }
}
