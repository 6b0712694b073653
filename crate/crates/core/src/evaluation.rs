//! Out-of-sample and cross-validated risk, plus report tables.

use std::fmt::Write as _;
use std::path::Path;

use ndarray::Axis;
use rayon::prelude::*;
use thiserror::Error;

use crate::combiner::{
    self, apply_rule, crs_joint, threshold_line_search, CombinerError, EnsembleRule, Method, StackWeights,
};
use crate::data::{make_folds, standardize, DataError, Dataset};
use crate::learners::{FittedModel, LearnerSpec};
use crate::loss::{decision_risk, LossError, LossSpec};
use crate::optimizer::CrsOptions;
use crate::seed;
use crate::stacking::{cv_predictions, full_predictions, ScoreMatrix, StackingError};

#[derive(Debug, Error)]
pub enum EvalError {
    #[error(transparent)]
    Data(#[from] DataError),
    #[error(transparent)]
    Loss(#[from] LossError),
    #[error(transparent)]
    Stacking(#[from] StackingError),
    #[error(transparent)]
    Combiner(#[from] CombinerError),
    #[error("outer training split of fold {0} lacks one class")]
    FoldMissingClass(usize),
    #[error("simplex grid needs K <= 3, got K = {0}")]
    GridTooLarge(usize),
    #[error("grid step must divide 1 evenly, got {0}")]
    InvalidGridStep(f64),
    #[error("crs training objective {crs} exceeds two-step objective {two_step}")]
    DominanceViolated { crs: f64, two_step: f64 },
    #[error("io: {0}")]
    Io(String),
}

/// Stacking output on one training set: `Z`, the full-data matrix, the
/// full-data models and the NNLS weights shared by all methods.
#[derive(Debug, Clone)]
pub struct StackedFit {
    pub z: ScoreMatrix,
    pub full: ScoreMatrix,
    pub models: Vec<FittedModel>,
    pub weights: StackWeights,
    pub labels: Vec<u8>,
}

impl StackedFit {
    pub fn fit(library: &[LearnerSpec], d: &Dataset, inner_folds: usize, fold_seed: u64) -> Result<Self, EvalError> {
        let plan = make_folds(d.n(), inner_folds, d.labels(), fold_seed)?;
        let z = cv_predictions(library, d, &plan)?;
        let (full, models) = full_predictions(library, d)?;
        let weights = StackWeights::fit(&z, d.labels())?;
        Ok(Self {
            z,
            full,
            models,
            weights,
            labels: d.labels().to_vec(),
        })
    }

    pub fn derive(&self, method: Method, spec: LossSpec, opts: &CrsOptions) -> Result<EnsembleRule, EvalError> {
        Ok(combiner::derive_rule(
            method,
            &self.weights,
            &self.z,
            Some(&self.full),
            &self.labels,
            spec,
            opts,
        )?)
    }

    /// Rules for every requested method at one λ. The crs rule's training
    /// objective is checked against the two-step rule's.
    pub fn derive_all(&self, methods: &[Method], spec: LossSpec, opts: &CrsOptions) -> Result<Vec<EnsembleRule>, EvalError> {
        let rules = methods
            .iter()
            .map(|&m| self.derive(m, spec, opts))
            .collect::<Result<Vec<_>, _>>()?;
        if let Some(crs) = rules.iter().find(|r| r.method == Method::Crs) {
            let two_step = match rules.iter().find(|r| r.method == Method::TwoStep) {
                Some(r) => r.training_objective,
                None => self.weights.two_step(&self.z, &self.labels, spec)?.training_objective,
            };
            if crs.training_objective > two_step {
                return Err(EvalError::DominanceViolated {
                    crs: crs.training_objective,
                    two_step,
                });
            }
        }
        Ok(rules)
    }
}

/// Empirical risk of the rule on held-out data.
pub fn out_of_sample_eval(rule: &EnsembleRule, models: &[FittedModel], test: &Dataset, spec: LossSpec) -> Result<f64, EvalError> {
    let decisions = apply_rule(rule, models, test.features())?;
    Ok(decision_risk(test.labels(), &decisions, spec)?.risk)
}

/// Settings shared by the cross-validated risk routines.
#[derive(Debug, Clone)]
pub struct CvSettings {
    pub outer_folds: usize,
    pub inner_folds: usize,
    pub seed: u64,
    pub crs: CrsOptions,
}

/// Pooled cross-validated risk for every (method, λ) pair.
#[derive(Debug, Clone, PartialEq)]
pub struct CvRiskTable {
    pub methods: Vec<Method>,
    pub lambdas: Vec<f64>,
    /// `risks[m][l]`.
    pub risks: Vec<Vec<f64>>,
    /// Number of (outer fold, λ) derivations in which the crs rule was
    /// compared against two-step on its training data.
    pub dominance_checks: usize,
}

impl CvRiskTable {
    pub fn risk(&self, method: Method, lambda: f64) -> Option<f64> {
        let m = self.methods.iter().position(|&x| x == method)?;
        let l = self.lambdas.iter().position(|&x| x == lambda)?;
        Some(self.risks[m][l])
    }
}

/// For each outer fold: standardize on the outer-training rows, stack with an
/// inner fold plan, derive every rule, classify the outer-validation rows.
/// Errors are pooled over all validation rows. Rules that need an inner
/// optimizer seed get one derived from the outer fold index.
pub fn cv_risk_table(
    methods: &[Method],
    lambdas: &[f64],
    library: &[LearnerSpec],
    d: &Dataset,
    settings: &CvSettings,
) -> Result<CvRiskTable, EvalError> {
    let specs = lambdas
        .iter()
        .map(|&l| LossSpec::new(l))
        .collect::<Result<Vec<_>, _>>()?;
    let outer = make_folds(d.n(), settings.outer_folds, d.labels(), seed::derive(settings.seed, "outer"))?;
    let inner_seed = seed::derive(settings.seed, "inner");
    let crs_seed = seed::derive(settings.seed, "crs");

    // per fold: counts[m][l] = (false negatives, false positives)
    let per_fold: Vec<Vec<Vec<(usize, usize)>>> = (0..outer.folds())
        .into_par_iter()
        .map(|f| {
            let train_raw = d.subset(&outer.training(f))?;
            if !train_raw.has_both_classes() {
                return Err(EvalError::FoldMissingClass(f));
            }
            let (train, params) = standardize(&train_raw)?;
            let valid_idx = outer.validation(f);
            let valid_x = params.apply(d.features().select(Axis(0), &valid_idx).view());
            let valid_y: Vec<u8> = valid_idx.iter().map(|&i| d.labels()[i]).collect();
            let stack = StackedFit::fit(library, &train, settings.inner_folds, seed::derive_index(inner_seed, f as u64))?;
            let opts = CrsOptions {
                seed: seed::derive_index(crs_seed, f as u64),
                ..settings.crs.clone()
            };
            let mut counts = vec![vec![(0, 0); specs.len()]; methods.len()];
            for (l, &spec) in specs.iter().enumerate() {
                let rules = stack.derive_all(methods, spec, &opts)?;
                for (m, rule) in rules.iter().enumerate() {
                    let decisions = apply_rule(rule, &stack.models, valid_x.view())?;
                    let r = decision_risk(&valid_y, &decisions, spec)?;
                    counts[m][l] = (r.false_negatives, r.false_positives);
                }
            }
            Ok(counts)
        })
        .collect::<Result<_, EvalError>>()?;

    let mut risks = vec![vec![0.0; specs.len()]; methods.len()];
    for (m, row) in risks.iter_mut().enumerate() {
        for (l, cell) in row.iter_mut().enumerate() {
            let (fneg, fpos) = per_fold
                .iter()
                .fold((0, 0), |acc, fold| (acc.0 + fold[m][l].0, acc.1 + fold[m][l].1));
            *cell = specs[l].risk_from_counts(fneg, fpos, d.n());
        }
    }
    let dominance_checks = if methods.contains(&Method::Crs) {
        outer.folds() * specs.len()
    } else {
        0
    };
    Ok(CvRiskTable {
        methods: methods.to_vec(),
        lambdas: lambdas.to_vec(),
        risks,
        dominance_checks,
    })
}

/// Pooled cross-validated risk of one method at one λ.
pub fn cv_risk(method: Method, library: &[LearnerSpec], d: &Dataset, spec: LossSpec, settings: &CvSettings) -> Result<f64, EvalError> {
    let table = cv_risk_table(&[method], &[spec.lambda()], library, d, settings)?;
    Ok(table.risks[0][0])
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridCheck {
    pub grid_min: f64,
    pub crs_value: f64,
}

/// All compositions of `total` into `parts` non-negative integers.
fn compositions(total: usize, parts: usize) -> Vec<Vec<usize>> {
    if parts == 1 {
        return vec![vec![total]];
    }
    let mut out = Vec::new();
    for first in 0..=total {
        for mut rest in compositions(total - first, parts - 1) {
            rest.insert(0, first);
            out.push(rest);
        }
    }
    out
}

/// Exhaustive minimum of the joint objective over a simplex grid of weights
/// (every threshold candidate per grid point), next to the crs value.
pub fn grid_selector_check(z: &ScoreMatrix, labels: &[u8], spec: LossSpec, grid_step: f64, opts: &CrsOptions) -> Result<GridCheck, EvalError> {
    let k = z.k();
    if k > 3 {
        return Err(EvalError::GridTooLarge(k));
    }
    let steps = (1.0 / grid_step).round();
    if !(grid_step > 0.0 && steps >= 1.0 && (steps * grid_step - 1.0).abs() < 1e-9) {
        return Err(EvalError::InvalidGridStep(grid_step));
    }
    let steps = steps as usize;
    let mut grid_min = f64::INFINITY;
    for c in compositions(steps, k) {
        let alpha: Vec<f64> = c.iter().map(|&v| v as f64 / steps as f64).collect();
        let scores = combiner::combine(z.values(), &alpha);
        grid_min = grid_min.min(threshold_line_search(&scores, labels, spec)?.risk);
    }
    let crs_value = crs_joint(z, labels, spec, opts)?.training_objective;
    Ok(GridCheck { grid_min, crs_value })
}

/// One row of an experiment report.
#[derive(Debug, Clone, PartialEq)]
pub struct ReportRow {
    pub method: String,
    pub lambda: f64,
    pub k: usize,
    pub risk: f64,
    pub rel_diff: Option<f64>,
    pub threshold: Option<f64>,
    pub alpha: Vec<f64>,
    pub seed: u64,
    pub runtime_s: Option<f64>,
}

pub const REPORT_HEADER: [&str; 9] = [
    "method",
    "lambda",
    "K",
    "risk",
    "rel_diff",
    "threshold",
    "alpha_json_free_text",
    "seed",
    "runtime_s",
];

fn opt(v: Option<f64>) -> String {
    v.map_or_else(|| "NA".to_owned(), |x| x.to_string())
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ExperimentReport {
    pub rows: Vec<ReportRow>,
}

impl ExperimentReport {
    pub fn to_csv_string(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(REPORT_HEADER).expect("in-memory write");
        for r in &self.rows {
            let alpha: Vec<String> = r.alpha.iter().map(f64::to_string).collect();
            w.write_record([
                r.method.clone(),
                r.lambda.to_string(),
                r.k.to_string(),
                r.risk.to_string(),
                opt(r.rel_diff),
                opt(r.threshold),
                format!("[{}]", alpha.join(",")),
                r.seed.to_string(),
                opt(r.runtime_s),
            ])
            .expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("in-memory flush")).expect("csv output is utf-8")
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<(), EvalError> {
        std::fs::write(path, self.to_csv_string()).map_err(|e| EvalError::Io(e.to_string()))
    }

    /// Fixed-width table for terminals.
    pub fn summary(&self) -> String {
        let mut s = format!(
            "{:<12} {:>7} {:>3} {:>9} {:>9} {:>10} {:>6}\n",
            "method", "lambda", "K", "risk%", "rel_diff%", "threshold", "seed"
        );
        for r in &self.rows {
            let _ = writeln!(
                s,
                "{:<12} {:>7.3} {:>3} {:>9.3} {:>9} {:>10} {:>6}",
                r.method,
                r.lambda,
                r.k,
                100.0 * r.risk,
                r.rel_diff.map_or_else(|| "NA".to_owned(), |v| format!("{:.2}", 100.0 * v)),
                r.threshold.map_or_else(|| "NA".to_owned(), |v| format!("{v:.4}")),
                r.seed
            );
        }
        s
    }

    /// Mean of `field` over rows matching `method` and `lambda`.
    pub fn mean(&self, method: &str, lambda: f64, field: impl Fn(&ReportRow) -> Option<f64>) -> Option<f64> {
        let vals: Vec<f64> = self
            .rows
            .iter()
            .filter(|r| r.method == method && r.lambda == lambda)
            .filter_map(field)
            .collect();
        (!vals.is_empty()).then(|| vals.iter().sum::<f64>() / vals.len() as f64)
    }
}

/// Per-observation scores behind the three thresholds, for density plots:
/// the full-data ensemble score, the cross-validated ensemble score and the
/// cross-validated score under the crs weights, plus a sidecar with the
/// three thresholds.
pub fn write_densities(
    dir: impl AsRef<Path>,
    stem: &str,
    stack: &StackedFit,
    conditional: &EnsembleRule,
    two_step: &EnsembleRule,
    crs: &EnsembleRule,
) -> Result<(), EvalError> {
    let io = |e: std::io::Error| EvalError::Io(e.to_string());
    let dir = dir.as_ref();
    std::fs::create_dir_all(dir).map_err(io)?;
    let sl = combiner::combine(stack.full.values(), &conditional.alpha);
    let cv = combiner::combine(stack.z.values(), &two_step.alpha);
    let za = combiner::combine(stack.z.values(), &crs.alpha);
    let mut body = String::from("sl_score,cv_sl_score,z_alpha_score,label\n");
    for i in 0..sl.len() {
        let _ = writeln!(body, "{},{},{},{}", sl[i], cv[i], za[i], stack.labels[i]);
    }
    std::fs::write(dir.join(format!("{stem}.csv")), body).map_err(io)?;
    let side = format!(
        "conditional={}\ntwo_step={}\ncrs={}\n",
        conditional.threshold, two_step.threshold, crs.threshold
    );
    std::fs::write(dir.join(format!("{stem}.thresholds.txt")), side).map_err(io)
}
