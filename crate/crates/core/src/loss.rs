//! Weighted misclassification loss and risk.
//!
//! A false negative costs `λ`, a false positive `1 − λ`. Classification is
//! always `1{score ≥ c}`; a score exactly equal to the threshold is positive.

use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum LossError {
    #[error("lambda must lie strictly inside (0, 1), got {0}")]
    InvalidLambda(f64),
    #[error("labels ({labels}) and scores ({scores}) differ in length")]
    LengthMismatch { labels: usize, scores: usize },
    #[error("empty input")]
    EmptyInput,
    #[error("reference risk must be positive, got {0}")]
    ZeroReference(f64),
}

/// False-negative penalty `λ ∈ (0, 1)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossSpec {
    lambda: f64,
}

impl LossSpec {
    pub fn new(lambda: f64) -> Result<Self, LossError> {
        if lambda > 0.0 && lambda < 1.0 {
            Ok(Self { lambda })
        } else {
            Err(LossError::InvalidLambda(lambda))
        }
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    /// Largest possible per-observation loss.
    pub fn max_loss(&self) -> f64 {
        self.lambda.max(1.0 - self.lambda)
    }

    /// Risk from error counts. Every risk in the crate goes through this one
    /// expression so that risks of identical classifications compare equal.
    pub fn risk_from_counts(&self, false_negatives: usize, false_positives: usize, n: usize) -> f64 {
        (self.lambda * false_negatives as f64 + (1.0 - self.lambda) * false_positives as f64) / n as f64
    }
}

/// Loss of action `a` when the truth is `y`.
pub fn weighted_loss(y: u8, a: u8, spec: LossSpec) -> f64 {
    match (y, a) {
        (1, 0) => spec.lambda,
        (0, 1) => 1.0 - spec.lambda,
        _ => 0.0,
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RiskReport {
    pub risk: f64,
    /// False-negative rate among positives (0 if there are none).
    pub fnr: f64,
    /// False-positive rate among negatives (0 if there are none).
    pub fpr: f64,
    pub prevalence: f64,
    pub n: usize,
    pub false_negatives: usize,
    pub false_positives: usize,
    /// Set when one class is absent and its conditional rate is reported as 0.
    pub missing_class: bool,
}

/// Empirical weighted risk of `1{score ≥ c}`.
pub fn empirical_risk(labels: &[u8], scores: &[f64], c: f64, spec: LossSpec) -> Result<RiskReport, LossError> {
    if labels.len() != scores.len() {
        return Err(LossError::LengthMismatch {
            labels: labels.len(),
            scores: scores.len(),
        });
    }
    if labels.is_empty() {
        return Err(LossError::EmptyInput);
    }
    let (mut fneg, mut fpos, mut pos) = (0usize, 0usize, 0usize);
    for (&y, &s) in labels.iter().zip(scores) {
        let predicted_positive = s >= c;
        if y == 1 {
            pos += 1;
            if !predicted_positive {
                fneg += 1;
            }
        } else if predicted_positive {
            fpos += 1;
        }
    }
    Ok(report_from_counts(fneg, fpos, pos, labels.len(), spec))
}

/// Empirical risk of already-made decisions.
pub fn decision_risk(labels: &[u8], decisions: &[u8], spec: LossSpec) -> Result<RiskReport, LossError> {
    if labels.len() != decisions.len() {
        return Err(LossError::LengthMismatch {
            labels: labels.len(),
            scores: decisions.len(),
        });
    }
    if labels.is_empty() {
        return Err(LossError::EmptyInput);
    }
    let (mut fneg, mut fpos, mut pos) = (0usize, 0usize, 0usize);
    for (&y, &a) in labels.iter().zip(decisions) {
        pos += usize::from(y == 1);
        fneg += usize::from(y == 1 && a == 0);
        fpos += usize::from(y == 0 && a == 1);
    }
    Ok(report_from_counts(fneg, fpos, pos, labels.len(), spec))
}

fn report_from_counts(fneg: usize, fpos: usize, pos: usize, n: usize, spec: LossSpec) -> RiskReport {
    let neg = n - pos;
    RiskReport {
        risk: spec.risk_from_counts(fneg, fpos, n),
        fnr: if pos > 0 { fneg as f64 / pos as f64 } else { 0.0 },
        fpr: if neg > 0 { fpos as f64 / neg as f64 } else { 0.0 },
        prevalence: pos as f64 / n as f64,
        n,
        false_negatives: fneg,
        false_positives: fpos,
        missing_class: pos == 0 || neg == 0,
    }
}

/// `(risk − reference) / reference`.
pub fn relative_difference(risk: f64, reference_risk: f64) -> Result<f64, LossError> {
    if !(reference_risk > 0.0) {
        return Err(LossError::ZeroReference(reference_risk));
    }
    Ok((risk - reference_risk) / reference_risk)
}
