use super::line_search::threshold_line_search;
use super::nnls::{nnls, NnlsSolution};
use super::{combine, normalize, CombinerError, EnsembleRule, Method};
use crate::loss::{empirical_risk, LossSpec};
use crate::optimizer::{crs2_minimize, CrsOptions, OptimResult};
use crate::stacking::ScoreMatrix;

/// Upper edge of the coefficient box searched by CRS.
const ALPHA_BOX: f64 = 5.0;
/// Margin added on both sides of the initial score range for the threshold.
const THRESHOLD_MARGIN: f64 = 0.5;

/// NNLS stacking weights. They depend only on `Z` and the labels, so one fit
/// serves every λ and every method.
#[derive(Debug, Clone, PartialEq)]
pub struct StackWeights {
    pub nnls: NnlsSolution,
    /// `nnls.coefficients` scaled onto the simplex.
    pub alpha: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CrsOutcome {
    pub rule: EnsembleRule,
    /// `None` when `K = 1` and no search was needed.
    pub optim: Option<OptimResult>,
    /// Training risk at the NNLS starting point.
    pub initial_objective: f64,
    /// Set when the search result was replaced by the two-step rule.
    pub safeguard_applied: bool,
}

fn check_labels(z: &ScoreMatrix, labels: &[u8]) -> Result<(), CombinerError> {
    if z.n() == 0 {
        return Err(CombinerError::EmptyInput);
    }
    if labels.len() != z.n() {
        return Err(CombinerError::LengthMismatch {
            expected: z.n(),
            got: labels.len(),
        });
    }
    Ok(())
}

impl StackWeights {
    pub fn fit(z: &ScoreMatrix, labels: &[u8]) -> Result<Self, CombinerError> {
        check_labels(z, labels)?;
        let target: Vec<f64> = labels.iter().map(|&y| f64::from(y)).collect();
        let sol = nnls(z.values(), &target)?;
        if sol.all_zero {
            return Err(CombinerError::AllZeroAlpha);
        }
        let alpha = normalize(&sol.coefficients)?;
        Ok(Self { nnls: sol, alpha })
    }

    fn rule(&self, z: &ScoreMatrix, method: Method, threshold: f64, spec: LossSpec, objective: f64) -> EnsembleRule {
        EnsembleRule {
            alpha: self.alpha.clone(),
            threshold,
            library: z.learners().to_vec(),
            method,
            lambda: spec.lambda(),
            training_objective: objective,
        }
    }

    /// Threshold chosen on the full-data ensemble score.
    pub fn conditional(&self, z: &ScoreMatrix, full: &ScoreMatrix, labels: &[u8], spec: LossSpec) -> Result<EnsembleRule, CombinerError> {
        if full.learners() != z.learners() || full.n() != z.n() || self.alpha.len() != z.k() {
            return Err(CombinerError::LibraryMismatch);
        }
        check_labels(full, labels)?;
        let scores = combine(full.values(), &self.alpha);
        let fit = threshold_line_search(&scores, labels, spec)?;
        Ok(self.rule(full, Method::Conditional, fit.threshold, spec, fit.risk))
    }

    /// Threshold chosen on the cross-validated ensemble score.
    pub fn two_step(&self, z: &ScoreMatrix, labels: &[u8], spec: LossSpec) -> Result<EnsembleRule, CombinerError> {
        check_labels(z, labels)?;
        if self.alpha.len() != z.k() {
            return Err(CombinerError::LibraryMismatch);
        }
        let scores = combine(z.values(), &self.alpha);
        let fit = threshold_line_search(&scores, labels, spec)?;
        Ok(self.rule(z, Method::TwoStep, fit.threshold, spec, fit.risk))
    }

    /// Joint search over `(c*, α*)` started from the NNLS solution.
    pub fn crs(&self, z: &ScoreMatrix, labels: &[u8], spec: LossSpec, opts: &CrsOptions) -> Result<CrsOutcome, CombinerError> {
        let mut fallback = self.two_step(z, labels, spec)?;
        fallback.method = Method::Crs;
        let k = z.k();
        if k == 1 {
            return Ok(CrsOutcome {
                initial_objective: fallback.training_objective,
                rule: fallback,
                optim: None,
                safeguard_applied: false,
            });
        }

        // largest NNLS coefficient first; it is scaled to 1
        let raw = &self.nnls.coefficients;
        let mut order: Vec<usize> = (0..k).collect();
        order.sort_by(|&a, &b| raw[b].total_cmp(&raw[a]));
        let top = raw[order[0]];
        let start_alpha: Vec<f64> = order.iter().map(|&j| raw[j] / top).collect();
        let columns: Vec<Vec<f64>> = order.iter().map(|&j| z.column(j)).collect();
        let n = z.n();
        let score_at = |i: usize, alpha: &[f64]| -> f64 { columns.iter().zip(alpha).map(|(c, a)| c[i] * a).sum() };
        let start_scores: Vec<f64> = (0..n).map(|i| score_at(i, &start_alpha)).collect();
        let start = threshold_line_search(&start_scores, labels, spec)?;
        let lo = start_scores.iter().copied().fold(f64::INFINITY, f64::min) - THRESHOLD_MARGIN;
        let hi = start_scores.iter().copied().fold(f64::NEG_INFINITY, f64::max) + THRESHOLD_MARGIN;

        let mut lower = vec![lo];
        let mut upper = vec![hi];
        lower.extend(std::iter::repeat_n(0.0, k));
        upper.extend(std::iter::repeat_n(ALPHA_BOX, k));
        let mut x0 = vec![start.threshold.clamp(lo, hi)];
        x0.extend(&start_alpha);

        let objective = |x: &[f64]| -> f64 {
            let (c, alpha) = (x[0], &x[1..]);
            let (mut fneg, mut fpos) = (0usize, 0usize);
            for (i, &y) in labels.iter().enumerate() {
                let positive = score_at(i, alpha) >= c;
                if y == 1 && !positive {
                    fneg += 1;
                } else if y == 0 && positive {
                    fpos += 1;
                }
            }
            spec.risk_from_counts(fneg, fpos, n)
        };
        let run_opts = CrsOptions {
            initial_point: Some(x0),
            ..opts.clone()
        };
        let result = crs2_minimize(objective, &lower, &upper, &run_opts)?;

        let total: f64 = result.point[1..].iter().sum();
        let mut candidate = None;
        if total > 0.0 {
            let mut alpha = vec![0.0; k];
            for (pos, &j) in order.iter().enumerate() {
                alpha[j] = result.point[1 + pos] / total;
            }
            let threshold = result.point[0] / total;
            let risk = empirical_risk(labels, &combine(z.values(), &alpha), threshold, spec)?.risk;
            candidate = Some(EnsembleRule {
                alpha,
                threshold,
                library: z.learners().to_vec(),
                method: Method::Crs,
                lambda: spec.lambda(),
                training_objective: risk,
            });
        }
        let (rule, safeguard_applied) = match candidate {
            Some(r) if r.training_objective <= fallback.training_objective => (r, false),
            _ => (fallback, true),
        };
        Ok(CrsOutcome {
            rule,
            optim: Some(result),
            initial_objective: start.risk,
            safeguard_applied,
        })
    }
}

/// Weights from `Z`, threshold from the full-data score.
pub fn conditional_thresholding(z: &ScoreMatrix, full: &ScoreMatrix, labels: &[u8], spec: LossSpec) -> Result<EnsembleRule, CombinerError> {
    StackWeights::fit(z, labels)?.conditional(z, full, labels, spec)
}

/// Weights from `Z`, threshold from `Z·α`.
pub fn two_step(z: &ScoreMatrix, labels: &[u8], spec: LossSpec) -> Result<EnsembleRule, CombinerError> {
    StackWeights::fit(z, labels)?.two_step(z, labels, spec)
}

/// Weights and threshold jointly; never worse on `Z` than [`two_step`].
pub fn crs_joint(z: &ScoreMatrix, labels: &[u8], spec: LossSpec, opts: &CrsOptions) -> Result<EnsembleRule, CombinerError> {
    Ok(crs_joint_detailed(z, labels, spec, opts)?.rule)
}

pub fn crs_joint_detailed(z: &ScoreMatrix, labels: &[u8], spec: LossSpec, opts: &CrsOptions) -> Result<CrsOutcome, CombinerError> {
    StackWeights::fit(z, labels)?.crs(z, labels, spec, opts)
}

/// Dispatch on `method`. `full` is required for the conditional method only.
pub fn derive_rule(
    method: Method,
    weights: &StackWeights,
    z: &ScoreMatrix,
    full: Option<&ScoreMatrix>,
    labels: &[u8],
    spec: LossSpec,
    opts: &CrsOptions,
) -> Result<EnsembleRule, CombinerError> {
    match method {
        Method::Conditional => weights.conditional(z, full.ok_or(CombinerError::LibraryMismatch)?, labels, spec),
        Method::TwoStep => weights.two_step(z, labels, spec),
        Method::Crs => Ok(weights.crs(z, labels, spec, opts)?.rule),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::learners::{LearnerKind, LearnerSpec};
    use crate::stacking::Provenance;
    use ndarray::Array2;
    use rand::Rng;

    fn lib(k: usize) -> Vec<LearnerSpec> {
        (0..k)
            .map(|j| LearnerSpec::new(LearnerKind::Echo, 0).with("feature", j as f64).unwrap())
            .collect()
    }

    fn matrix(values: Array2<f64>) -> ScoreMatrix {
        let k = values.ncols();
        ScoreMatrix::new(values, lib(k), Provenance::FullData).unwrap()
    }

    fn random_instance(n: usize, k: usize, seed: u64) -> (ScoreMatrix, Vec<u8>) {
        let mut rng = crate::seed::rng(seed);
        let y: Vec<u8> = (0..n).map(|_| u8::from(rng.random_bool(0.4))).collect();
        let z = Array2::from_shape_fn((n, k), |(i, _)| {
            (0.35 * f64::from(y[i]) + rng.random_range(0.0..0.65)).clamp(0.0, 1.0)
        });
        (matrix(z), y)
    }

    fn spec(l: f64) -> LossSpec {
        LossSpec::new(l).unwrap()
    }

    #[test]
    fn single_learner_reduces_to_line_search() {
        let (z, y) = random_instance(60, 1, 1);
        let ls = threshold_line_search(&z.column(0), &y, spec(0.3)).unwrap();
        for rule in [
            two_step(&z, &y, spec(0.3)).unwrap(),
            conditional_thresholding(&z, &z, &y, spec(0.3)).unwrap(),
            crs_joint(&z, &y, spec(0.3), &CrsOptions::default()).unwrap(),
        ] {
            assert_eq!(rule.alpha, vec![1.0]);
            assert_eq!(rule.threshold, ls.threshold);
            assert_eq!(rule.training_objective, ls.risk);
        }
    }

    #[test]
    fn identical_matrices_give_identical_thresholds() {
        let (z, y) = random_instance(80, 3, 2);
        let a = conditional_thresholding(&z, &z, &y, spec(0.2)).unwrap();
        let b = two_step(&z, &y, spec(0.2)).unwrap();
        assert_eq!(a.alpha, b.alpha);
        assert_eq!(a.threshold, b.threshold);
    }

    #[test]
    fn zero_weights_are_fatal() {
        let z = matrix(Array2::from_shape_fn((5, 2), |(i, _)| i as f64 + 1.0));
        // all-negative labels: the target is zero, so is the NNLS fit
        assert_eq!(two_step(&z, &[0; 5], spec(0.5)), Err(CombinerError::AllZeroAlpha));
    }

    #[test]
    fn perfect_separation_objective_zero() {
        let z = matrix(Array2::from_shape_vec((4, 2), vec![0.1, 0.2, 0.2, 0.1, 0.8, 0.9, 0.9, 0.7]).unwrap());
        let y = [0, 0, 1, 1];
        assert_eq!(two_step(&z, &y, spec(0.5)).unwrap().training_objective, 0.0);
        assert_eq!(crs_joint(&z, &y, spec(0.5), &CrsOptions::default()).unwrap().training_objective, 0.0);
    }

    #[test]
    fn crs_never_worse_and_on_simplex() {
        for seed in 0..20 {
            let (z, y) = random_instance(50, 3, seed);
            for l in [0.2, 0.5, 0.8] {
                let opts = CrsOptions {
                    seed,
                    ..CrsOptions::default()
                };
                let out = crs_joint_detailed(&z, &y, spec(l), &opts).unwrap();
                let ts = two_step(&z, &y, spec(l)).unwrap();
                assert!(out.rule.training_objective <= ts.training_objective);
                let s: f64 = out.rule.alpha.iter().sum();
                assert!((s - 1.0).abs() <= 1e-9);
                assert!(out.rule.alpha.iter().all(|&a| a >= 0.0));
                let recomputed = empirical_risk(&y, &combine(z.values(), &out.rule.alpha), out.rule.threshold, spec(l))
                    .unwrap()
                    .risk;
                assert_eq!(recomputed, out.rule.training_objective);
                assert_eq!(out.rule.method, Method::Crs);
            }
        }
    }

    #[test]
    fn conditional_requires_matching_library() {
        let (z, y) = random_instance(20, 2, 3);
        let (other, _) = random_instance(20, 3, 3);
        assert_eq!(
            conditional_thresholding(&z, &other, &y, spec(0.5)),
            Err(CombinerError::LibraryMismatch)
        );
    }
}
