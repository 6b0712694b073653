//! Controlled random search with local mutation (CRS2-LM) on a box.
//!
//! The objective only needs to be total on the box; no smoothness is
//! assumed, so piecewise-constant empirical risks are fine.

use rand::seq::index;
use rand::Rng;
use thiserror::Error;

use crate::seed;

#[derive(Debug, Error, PartialEq)]
pub enum OptimError {
    #[error("bounds must satisfy lower < upper with finite values (coordinate {0})")]
    BadBounds(usize),
    #[error("lower and upper bounds differ in length ({lower} vs {upper})")]
    DimensionMismatch { lower: usize, upper: usize },
    #[error("evaluation budget {budget} is below the population size {population}")]
    BudgetTooSmall { budget: usize, population: usize },
    #[error("population {population} must be at least dim + 1 = {needed}")]
    PopulationTooSmall { population: usize, needed: usize },
    #[error("xtol_rel must be finite and non-negative, got {0}")]
    InvalidTolerance(f64),
    #[error("initial point has wrong length or lies outside the box")]
    InitialPointOutOfBounds,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CrsOptions {
    /// `None` means `10·(dim + 1)`.
    pub population_size: Option<usize>,
    pub max_evaluations: usize,
    pub xtol_rel: f64,
    pub seed: u64,
    pub initial_point: Option<Vec<f64>>,
}

impl Default for CrsOptions {
    fn default() -> Self {
        Self {
            population_size: None,
            max_evaluations: 10_000,
            xtol_rel: 1e-6,
            seed: 0,
            initial_point: None,
        }
    }
}

impl CrsOptions {
    pub fn population_for(&self, dim: usize) -> usize {
        self.population_size.unwrap_or(10 * (dim + 1))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopReason {
    Xtol,
    MaxEval,
    Stalled,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimResult {
    pub point: Vec<f64>,
    pub value: f64,
    pub evaluations: usize,
    pub stop_reason: StopReason,
    /// Population best after initialization and after every replacement.
    pub trace: Vec<f64>,
}

fn in_box(x: &[f64], lower: &[f64], upper: &[f64]) -> bool {
    x.iter().zip(lower).zip(upper).all(|((v, lo), hi)| v >= lo && v <= hi)
}

fn argmin(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in values.iter().enumerate() {
        if v.total_cmp(&values[best]).is_lt() {
            best = i;
        }
    }
    best
}

fn argmax(values: &[f64]) -> usize {
    let mut worst = 0;
    for (i, v) in values.iter().enumerate() {
        if v.total_cmp(&values[worst]).is_gt() {
            worst = i;
        }
    }
    worst
}

/// Minimize `objective` over the box `[lower, upper]`.
pub fn crs2_minimize<F>(objective: F, lower: &[f64], upper: &[f64], opts: &CrsOptions) -> Result<OptimResult, OptimError>
where
    F: Fn(&[f64]) -> f64,
{
    if lower.len() != upper.len() {
        return Err(OptimError::DimensionMismatch {
            lower: lower.len(),
            upper: upper.len(),
        });
    }
    let dim = lower.len();
    if dim == 0 {
        return Err(OptimError::BadBounds(0));
    }
    for j in 0..dim {
        if !(lower[j].is_finite() && upper[j].is_finite() && lower[j] < upper[j]) {
            return Err(OptimError::BadBounds(j));
        }
    }
    let pop = opts.population_for(dim);
    if pop < dim + 1 {
        return Err(OptimError::PopulationTooSmall {
            population: pop,
            needed: dim + 1,
        });
    }
    if opts.max_evaluations < pop {
        return Err(OptimError::BudgetTooSmall {
            budget: opts.max_evaluations,
            population: pop,
        });
    }
    if !(opts.xtol_rel >= 0.0 && opts.xtol_rel.is_finite()) {
        return Err(OptimError::InvalidTolerance(opts.xtol_rel));
    }
    if let Some(x0) = &opts.initial_point {
        if x0.len() != dim || !in_box(x0, lower, upper) {
            return Err(OptimError::InitialPointOutOfBounds);
        }
    }

    let mut rng = seed::rng(opts.seed);
    let mut points: Vec<Vec<f64>> = (0..pop)
        .map(|_| (0..dim).map(|j| rng.random_range(lower[j]..=upper[j])).collect())
        .collect();
    if let Some(x0) = &opts.initial_point {
        points[0] = x0.clone();
    }
    let mut values: Vec<f64> = points.iter().map(|x| objective(x)).collect();
    let mut evaluations = pop;
    let mut best = argmin(&values);
    let mut trace = vec![values[best]];
    let mut idle = 0usize;
    let stall_limit = 200 * dim;

    let mut trial = vec![0.0; dim];
    let mut centroid = vec![0.0; dim];
    let stop_reason = loop {
        let worst = argmax(&values);
        let (fb, fw) = (values[best], values[worst]);
        if fw - fb <= opts.xtol_rel * (fb.abs() + fw.abs()) / 2.0 {
            break StopReason::Xtol;
        }
        if evaluations >= opts.max_evaluations {
            break StopReason::MaxEval;
        }
        if idle >= stall_limit {
            break StopReason::Stalled;
        }

        // best plus `dim` distinct others
        let mut simplex: Vec<usize> = index::sample(&mut rng, pop - 1, dim)
            .into_iter()
            .map(|i| if i >= best { i + 1 } else { i })
            .collect();
        simplex.push(best);
        let reflect = *simplex
            .iter()
            .max_by(|&&a, &&b| values[a].total_cmp(&values[b]).then(b.cmp(&a)))
            .expect("non-empty simplex");
        centroid.fill(0.0);
        for &i in simplex.iter().filter(|&&i| i != reflect) {
            for (c, v) in centroid.iter_mut().zip(&points[i]) {
                *c += v;
            }
        }
        for (t, (c, w)) in trial.iter_mut().zip(centroid.iter().zip(&points[reflect])) {
            *t = 2.0 * (c / dim as f64) - w;
        }

        let mut replaced = false;
        if in_box(&trial, lower, upper) {
            let f = objective(&trial);
            evaluations += 1;
            if f < fw {
                points[worst].copy_from_slice(&trial);
                values[worst] = f;
                replaced = true;
            }
        }
        if !replaced && evaluations < opts.max_evaluations && rng.random_bool(0.5) {
            let mutant: Vec<f64> = points[best]
                .iter()
                .zip(&trial)
                .map(|(b, t)| {
                    let w: f64 = rng.random();
                    w * b + (1.0 - w) * t
                })
                .collect();
            if in_box(&mutant, lower, upper) {
                let f = objective(&mutant);
                evaluations += 1;
                if f < fw {
                    points[worst] = mutant;
                    values[worst] = f;
                    replaced = true;
                }
            }
        }

        if replaced {
            idle = 0;
            if values[worst] < values[best] {
                best = worst;
            }
            let last = *trace.last().expect("trace starts non-empty");
            assert!(values[best] <= last, "population best increased");
            trace.push(values[best]);
        } else {
            idle += 1;
        }
    };

    Ok(OptimResult {
        point: points[best].clone(),
        value: values[best],
        evaluations,
        stop_reason,
        trace,
    })
}
