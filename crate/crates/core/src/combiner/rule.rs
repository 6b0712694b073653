use std::fmt;
use std::str::FromStr;

use ndarray::ArrayView2;

use super::{CombinerError, Method};
use crate::learners::{self, FittedModel, LearnerSpec};

/// A derived classification rule `1{Σ_k α_k Ψ_k(x) ≥ c}`.
#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleRule {
    pub alpha: Vec<f64>,
    pub threshold: f64,
    pub library: Vec<LearnerSpec>,
    pub method: Method,
    pub lambda: f64,
    /// Empirical risk of the rule on the scores it was derived from.
    pub training_objective: f64,
}

impl EnsembleRule {
    pub fn k(&self) -> usize {
        self.alpha.len()
    }

    /// Classify precomputed library scores (`n × K`).
    pub fn classify_scores(&self, values: ArrayView2<'_, f64>) -> Result<Vec<u8>, CombinerError> {
        if values.ncols() != self.k() {
            return Err(CombinerError::LibraryMismatch);
        }
        Ok(super::combine(values, &self.alpha)
            .into_iter()
            .map(|s| u8::from(s >= self.threshold))
            .collect())
    }
}

fn check_models(rule: &EnsembleRule, models: &[FittedModel]) -> Result<(), CombinerError> {
    if models.len() != rule.library.len() || models.iter().zip(&rule.library).any(|(m, s)| &m.spec != s) {
        return Err(CombinerError::LibraryMismatch);
    }
    Ok(())
}

/// Combined ensemble score of each row.
pub fn rule_scores(rule: &EnsembleRule, models: &[FittedModel], x: ArrayView2<'_, f64>) -> Result<Vec<f64>, CombinerError> {
    check_models(rule, models)?;
    let mut out = vec![0.0; x.nrows()];
    for (m, &a) in models.iter().zip(&rule.alpha) {
        let p = learners::predict(m, x)?;
        for (o, v) in out.iter_mut().zip(p) {
            *o += a * v;
        }
    }
    Ok(out)
}

/// `1{score ≥ c}` for each row.
pub fn apply_rule(rule: &EnsembleRule, models: &[FittedModel], x: ArrayView2<'_, f64>) -> Result<Vec<u8>, CombinerError> {
    Ok(rule_scores(rule, models, x)?
        .into_iter()
        .map(|s| u8::from(s >= rule.threshold))
        .collect())
}

/// Line-oriented text record:
///
/// ```text
/// method=crs
/// lambda=0.2
/// learner=random_forest[...]@17
/// alpha=0.61,0.39
/// threshold=0.274
/// training_objective=0.0512
/// ```
impl fmt::Display for EnsembleRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "method={}", self.method)?;
        writeln!(f, "lambda={}", self.lambda)?;
        for l in &self.library {
            writeln!(f, "learner={l}")?;
        }
        let alpha: Vec<String> = self.alpha.iter().map(f64::to_string).collect();
        writeln!(f, "alpha={}", alpha.join(","))?;
        writeln!(f, "threshold={}", self.threshold)?;
        writeln!(f, "training_objective={}", self.training_objective)
    }
}

impl FromStr for EnsembleRule {
    type Err = CombinerError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = |what: &str| CombinerError::RuleParse(what.to_owned());
        let num = |v: &str, key: &str| v.trim().parse::<f64>().map_err(|_| bad(key));
        let (mut method, mut lambda, mut alpha, mut threshold, mut objective) = (None, None, None, None, None);
        let mut library = Vec::new();
        for line in s.lines().map(str::trim).filter(|l| !l.is_empty() && !l.starts_with('#')) {
            let (key, value) = line.split_once('=').ok_or_else(|| bad(line))?;
            match key.trim() {
                "method" => method = Some(value.trim().parse::<Method>()?),
                "lambda" => lambda = Some(num(value, "lambda")?),
                "learner" => library.push(value.trim().parse::<LearnerSpec>()?),
                "alpha" => {
                    alpha = Some(
                        value
                            .split(',')
                            .map(|v| num(v, "alpha"))
                            .collect::<Result<Vec<f64>, _>>()?,
                    )
                }
                "threshold" => threshold = Some(num(value, "threshold")?),
                "training_objective" => objective = Some(num(value, "training_objective")?),
                other => return Err(bad(&format!("unknown key `{other}`"))),
            }
        }
        let rule = EnsembleRule {
            method: method.ok_or_else(|| bad("missing method"))?,
            lambda: lambda.ok_or_else(|| bad("missing lambda"))?,
            alpha: alpha.ok_or_else(|| bad("missing alpha"))?,
            threshold: threshold.ok_or_else(|| bad("missing threshold"))?,
            training_objective: objective.ok_or_else(|| bad("missing training_objective"))?,
            library,
        };
        if rule.alpha.len() != rule.library.len() {
            return Err(bad("alpha and learner counts differ"));
        }
        Ok(rule)
    }
}
