//! Turning a library score matrix into a classification rule `1{Z·α ≥ c}`.

mod line_search;
mod nnls;
mod rule;
mod strategies;

use std::fmt;
use std::str::FromStr;

use ndarray::ArrayView2;
use thiserror::Error;

use crate::learners::LearnerError;
use crate::loss::LossError;
use crate::optimizer::OptimError;

pub use line_search::{candidate_thresholds, threshold_line_search, ThresholdFit};
pub use nnls::{nnls, NnlsSolution};
pub use rule::{apply_rule, rule_scores, EnsembleRule};
pub use strategies::{
    conditional_thresholding, crs_joint, crs_joint_detailed, derive_rule, two_step, CrsOutcome, StackWeights,
};

#[derive(Debug, Error, PartialEq)]
pub enum CombinerError {
    #[error("empty input")]
    EmptyInput,
    #[error("length mismatch: expected {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("non-finite value in scores or targets")]
    NonFinite,
    #[error("NNLS did not finish within {0} outer iterations")]
    MaxIterations(usize),
    #[error("NNLS returned the zero vector; no learner improves on the intercept")]
    AllZeroAlpha,
    #[error("score matrices or models do not match the rule's library")]
    LibraryMismatch,
    #[error("unknown method `{0}`")]
    UnknownMethod(String),
    #[error("cannot parse rule: {0}")]
    RuleParse(String),
    #[error(transparent)]
    Optimizer(#[from] OptimError),
    #[error(transparent)]
    Loss(#[from] LossError),
    #[error(transparent)]
    Learner(#[from] LearnerError),
}

/// Rule-derivation strategy.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Method {
    /// Weights from cross-validated scores, threshold from full-data scores.
    Conditional,
    /// Same weights, threshold from cross-validated scores.
    TwoStep,
    /// Weights and threshold jointly by controlled random search.
    Crs,
}

impl Method {
    pub const ALL: [Method; 3] = [Method::Conditional, Method::TwoStep, Method::Crs];

    pub fn name(self) -> &'static str {
        match self {
            Method::Conditional => "conditional",
            Method::TwoStep => "two_step",
            Method::Crs => "crs",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = CombinerError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Method::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| CombinerError::UnknownMethod(s.to_owned()))
    }
}

/// Row-wise `Σ_k values[i,k]·α_k`, summed in column order.
pub fn combine(values: ArrayView2<'_, f64>, alpha: &[f64]) -> Vec<f64> {
    values
        .rows()
        .into_iter()
        .map(|row| row.iter().zip(alpha).map(|(z, a)| z * a).sum())
        .collect()
}

/// Divide by the coefficient sum.
pub(crate) fn normalize(alpha: &[f64]) -> Result<Vec<f64>, CombinerError> {
    let s: f64 = alpha.iter().sum();
    if !(s > 0.0) {
        return Err(CombinerError::AllZeroAlpha);
    }
    Ok(alpha.iter().map(|a| a / s).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn method_names_round_trip() {
        for m in Method::ALL {
            assert_eq!(m.name().parse::<Method>().unwrap(), m);
        }
        assert!("joint".parse::<Method>().is_err());
    }

    #[test]
    fn normalization() {
        assert_eq!(normalize(&[1.0, 3.0]).unwrap(), vec![0.25, 0.75]);
        assert_eq!(normalize(&[0.0, 0.0]), Err(CombinerError::AllZeroAlpha));
    }
}
