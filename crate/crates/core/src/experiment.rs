//! End-to-end runners: simulation studies against the Bayes rule and
//! cross-validated comparisons on a loaded dataset.

use std::path::PathBuf;
use std::time::Instant;

use crate::combiner::{EnsembleRule, Method};
use crate::data::{standardize, Dataset, StandardizationParams};
use crate::evaluation::{
    cv_risk_table, out_of_sample_eval, write_densities, CvSettings, EvalError, ExperimentReport, ReportRow, StackedFit,
};
use crate::learners::{self, FittedModel, LearnerError, LearnerKind, LearnerSpec};
use crate::loss::{relative_difference, LossSpec};
use crate::optimizer::CrsOptions;
use crate::seed;
use crate::simulation::{bayes_rule_risk, generate, Setting, SimConfig};
use crate::Result;

/// `kind.key = value`, applied to every learner of that kind.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamOverride {
    pub kind: LearnerKind,
    pub key: String,
    pub value: f64,
}

/// Default library for `kinds` seeded from `master_seed`, with overrides.
pub fn build_library(kinds: &[LearnerKind], overrides: &[ParamOverride], master_seed: u64) -> std::result::Result<Vec<LearnerSpec>, LearnerError> {
    let mut lib = learners::library(kinds, seed::derive(master_seed, "library"));
    for spec in &mut lib {
        let kind = spec.kind;
        for o in overrides.iter().filter(|o| o.kind == kind) {
            spec.set(&o.key, o.value)?;
        }
        spec.validate()?;
    }
    Ok(lib)
}

/// Settings common to every runner.
#[derive(Debug, Clone)]
pub struct CommonSettings {
    pub lambdas: Vec<f64>,
    pub methods: Vec<Method>,
    pub kinds: Vec<LearnerKind>,
    pub overrides: Vec<ParamOverride>,
    pub seeds: Vec<u64>,
    pub inner_folds: usize,
    pub crs: CrsOptions,
    /// Record wall-clock seconds per row (makes reports non-reproducible).
    pub timings: bool,
    pub dump_z: Option<PathBuf>,
    pub dump_densities: Option<PathBuf>,
}

#[derive(Debug, Clone)]
pub struct SimExperiment {
    pub setting: Setting,
    pub n_train: usize,
    pub n_test: usize,
    pub common: CommonSettings,
}

#[derive(Debug, Clone)]
pub struct DerivedRule {
    pub seed: u64,
    pub rule: EnsembleRule,
}

#[derive(Debug, Clone, Default)]
pub struct Outcome {
    pub report: ExperimentReport,
    pub rules: Vec<DerivedRule>,
    /// `(seed, λ, Bayes risk on the test sample)` for simulations.
    pub bayes: Vec<(u64, f64, f64)>,
    /// Number of crs rules whose training objective was checked against the
    /// two-step rule on the same data.
    pub dominance_checks: usize,
}

fn method_rank(name: &str) -> usize {
    Method::ALL.iter().position(|m| m.name() == name).unwrap_or(Method::ALL.len())
}

/// Rows ordered by method, then λ, keeping seed order within a cell.
fn sort_rows(rows: &mut [ReportRow], lambdas: &[f64]) {
    let lambda_rank = |l: f64| lambdas.iter().position(|&x| x == l).unwrap_or(usize::MAX);
    rows.sort_by_key(|r| (method_rank(&r.method), lambda_rank(r.lambda)));
}

fn crs_for(base: &CrsOptions, seed: u64) -> CrsOptions {
    CrsOptions {
        seed: seed::derive(seed, "crs"),
        ..base.clone()
    }
}

fn maybe_dump(common: &CommonSettings, stack: &StackedFit, seed: u64, spec: LossSpec, tag: &str) -> Result<()> {
    if let Some(dir) = &common.dump_z {
        std::fs::create_dir_all(dir).map_err(|e| EvalError::Io(e.to_string()))?;
        stack.z.write_csv(dir.join(format!("z_{tag}_seed{seed}.csv")), &stack.labels)?;
    }
    if let Some(dir) = &common.dump_densities {
        let opts = crs_for(&common.crs, seed);
        let cond = stack.derive(Method::Conditional, spec, &opts)?;
        let two = stack.derive(Method::TwoStep, spec, &opts)?;
        let crs = stack.derive(Method::Crs, spec, &opts)?;
        write_densities(dir, &format!("density_{tag}_seed{seed}_lambda{}", spec.lambda()), stack, &cond, &two, &crs)?;
    }
    Ok(())
}

/// Train on one simulated sample, evaluate on an independent one, and compare
/// with the Bayes rule on the test sample.
pub fn run_simulation(exp: &SimExperiment) -> Result<Outcome> {
    let common = &exp.common;
    let specs = common
        .lambdas
        .iter()
        .map(|&l| LossSpec::new(l))
        .collect::<std::result::Result<Vec<_>, _>>()?;
    let mut out = Outcome::default();
    for &s in &common.seeds {
        let train = generate(&SimConfig::new(exp.n_train, exp.setting, seed::derive(s, "sim-train")))?;
        let test = generate(&SimConfig::new(exp.n_test, exp.setting, seed::derive(s, "sim-test")))?;
        let (train_d, params) = standardize(&train.dataset)?;
        let test_d = params.apply_dataset(&test.dataset)?;
        let library = build_library(&common.kinds, &common.overrides, s)?;
        let stack = StackedFit::fit(&library, &train_d, common.inner_folds, seed::derive(s, "inner"))?;
        let opts = crs_for(&common.crs, s);
        for &spec in &specs {
            let bayes = bayes_rule_risk(&test, spec);
            out.bayes.push((s, spec.lambda(), bayes));
            maybe_dump(common, &stack, s, spec, exp.setting.name())?;
            let started = Instant::now();
            let rules = stack.derive_all(&common.methods, spec, &opts)?;
            if common.methods.contains(&Method::Crs) {
                out.dominance_checks += 1;
            }
            for rule in rules {
                let risk = out_of_sample_eval(&rule, &stack.models, &test_d, spec)?;
                out.report.rows.push(ReportRow {
                    method: rule.method.name().to_owned(),
                    lambda: spec.lambda(),
                    k: rule.k(),
                    risk,
                    rel_diff: Some(relative_difference(risk, bayes)?),
                    threshold: Some(rule.threshold),
                    alpha: rule.alpha.clone(),
                    seed: s,
                    runtime_s: common.timings.then(|| started.elapsed().as_secs_f64()),
                });
                out.rules.push(DerivedRule { seed: s, rule });
            }
        }
    }
    sort_rows(&mut out.report.rows, &common.lambdas);
    Ok(out)
}

/// Bayes-rule risk of freshly generated samples, one row per (seed, λ).
pub fn run_bayes_baseline(setting: Setting, n: usize, lambdas: &[f64], seeds: &[u64]) -> Result<Outcome> {
    let mut out = Outcome::default();
    for &s in seeds {
        let sample = generate(&SimConfig::new(n, setting, seed::derive(s, "sim-test")))?;
        for &l in lambdas {
            let risk = bayes_rule_risk(&sample, LossSpec::new(l)?);
            out.bayes.push((s, l, risk));
            out.report.rows.push(ReportRow {
                method: "bayes".into(),
                lambda: l,
                k: 0,
                risk,
                rel_diff: Some(0.0),
                threshold: Some(1.0 - l),
                alpha: Vec::new(),
                seed: s,
                runtime_s: None,
            });
        }
    }
    Ok(out)
}

#[derive(Debug, Clone)]
pub struct CvExperiment {
    pub data: Dataset,
    pub outer_folds: usize,
    pub repeats: usize,
    pub common: CommonSettings,
}

/// Rules fit on all of `d` (after standardization) for every method and λ.
pub struct FullFit {
    pub params: StandardizationParams,
    pub stack: StackedFit,
    pub rules: Vec<EnsembleRule>,
}

pub fn fit_full(d: &Dataset, common: &CommonSettings, s: u64) -> Result<FullFit> {
    let (std_d, params) = standardize(d)?;
    let library = build_library(&common.kinds, &common.overrides, s)?;
    let stack = StackedFit::fit(&library, &std_d, common.inner_folds, seed::derive(s, "inner"))?;
    let opts = crs_for(&common.crs, s);
    let mut rules = Vec::new();
    for &l in &common.lambdas {
        let spec = LossSpec::new(l)?;
        maybe_dump(common, &stack, s, spec, "data")?;
        rules.extend(stack.derive_all(&common.methods, spec, &opts)?);
    }
    Ok(FullFit { params, stack, rules })
}

/// Rules on the whole dataset; the reported risk is the training objective.
pub fn run_fit(d: &Dataset, common: &CommonSettings) -> Result<Outcome> {
    let mut out = Outcome::default();
    for &s in &common.seeds {
        let started = Instant::now();
        let fit = fit_full(d, common, s)?;
        if common.methods.contains(&Method::Crs) {
            out.dominance_checks += common.lambdas.len();
        }
        for rule in fit.rules {
            out.report.rows.push(ReportRow {
                method: rule.method.name().to_owned(),
                lambda: rule.lambda,
                k: rule.k(),
                risk: rule.training_objective,
                rel_diff: None,
                threshold: Some(rule.threshold),
                alpha: rule.alpha.clone(),
                seed: s,
                runtime_s: common.timings.then(|| started.elapsed().as_secs_f64()),
            });
            out.rules.push(DerivedRule { seed: s, rule });
        }
    }
    sort_rows(&mut out.report.rows, &common.lambdas);
    Ok(out)
}

/// Pooled outer-CV risk per (method, λ, seed), averaged over repeats; the
/// threshold and weights reported are those of the rule fit on all rows.
pub fn run_cv(exp: &CvExperiment) -> Result<Outcome> {
    let common = &exp.common;
    let library_for = |s: u64| build_library(&common.kinds, &common.overrides, s);
    let mut out = Outcome::default();
    for &s in &common.seeds {
        let started = Instant::now();
        let library = library_for(s)?;
        let mut sums = vec![vec![0.0; common.lambdas.len()]; common.methods.len()];
        for r in 0..exp.repeats.max(1) {
            let settings = CvSettings {
                outer_folds: exp.outer_folds,
                inner_folds: common.inner_folds,
                seed: if r == 0 { s } else { seed::derive_index(s, r as u64) },
                crs: common.crs.clone(),
            };
            let table = cv_risk_table(&common.methods, &common.lambdas, &library, &exp.data, &settings)?;
            out.dominance_checks += table.dominance_checks;
            for (m, row) in table.risks.iter().enumerate() {
                for (l, v) in row.iter().enumerate() {
                    sums[m][l] += v;
                }
            }
        }
        let fit = fit_full(&exp.data, common, s)?;
        if common.methods.contains(&Method::Crs) {
            out.dominance_checks += common.lambdas.len();
        }
        let elapsed = started.elapsed().as_secs_f64();
        for rule in fit.rules {
            let m = common.methods.iter().position(|&x| x == rule.method).expect("requested method");
            let l = common.lambdas.iter().position(|&x| x == rule.lambda).expect("requested lambda");
            out.report.rows.push(ReportRow {
                method: rule.method.name().to_owned(),
                lambda: rule.lambda,
                k: rule.k(),
                risk: sums[m][l] / exp.repeats.max(1) as f64,
                rel_diff: None,
                threshold: Some(rule.threshold),
                alpha: rule.alpha.clone(),
                seed: s,
                runtime_s: common.timings.then_some(elapsed),
            });
            out.rules.push(DerivedRule { seed: s, rule });
        }
    }
    sort_rows(&mut out.report.rows, &common.lambdas);
    Ok(out)
}

/// Refit a saved rule's library on `train` and measure its risk on `test`.
/// Both datasets are standardized with the training parameters.
pub fn evaluate_rule(rule: &EnsembleRule, train: &Dataset, test: &Dataset) -> Result<f64> {
    let (train_d, params) = standardize(train)?;
    let test_d = params.apply_dataset(test)?;
    let models = rule
        .library
        .iter()
        .map(|spec| learners::fit(spec, &train_d))
        .collect::<std::result::Result<Vec<FittedModel>, _>>()?;
    Ok(out_of_sample_eval(rule, &models, &test_d, LossSpec::new(rule.lambda)?)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn common(kinds: Vec<LearnerKind>) -> CommonSettings {
        CommonSettings {
            lambdas: vec![0.2, 0.8],
            methods: Method::ALL.to_vec(),
            kinds,
            overrides: vec![ParamOverride {
                kind: LearnerKind::RandomForest,
                key: "trees".into(),
                value: 20.0,
            }],
            seeds: vec![1, 2],
            inner_folds: 5,
            crs: CrsOptions::default(),
            timings: false,
            dump_z: None,
            dump_densities: None,
        }
    }

    #[test]
    fn overrides_apply_by_kind() {
        let lib = build_library(&[LearnerKind::RandomForest, LearnerKind::Cart], &common(vec![]).overrides, 3).unwrap();
        assert_eq!(lib[0].param("trees"), 20.0);
        assert_eq!(lib[1].param("max_depth"), 10.0);
        let bad = [ParamOverride {
            kind: LearnerKind::Cart,
            key: "trees".into(),
            value: 1.0,
        }];
        assert!(build_library(&[LearnerKind::Cart], &bad, 3).is_err());
    }

    #[test]
    fn small_simulation_is_complete_and_reproducible() {
        let exp = SimExperiment {
            setting: Setting::TransformedX,
            n_train: 300,
            n_test: 300,
            common: common(vec![LearnerKind::Logistic, LearnerKind::Cart, LearnerKind::RandomForest]),
        };
        let a = run_simulation(&exp).unwrap();
        assert_eq!(a.report.rows.len(), 3 * 2 * 2);
        assert_eq!(a.dominance_checks, 4);
        assert_eq!(a.report.rows[0].method, "conditional");
        assert_eq!(a.report.rows[0].lambda, 0.2);
        assert_eq!(a.report.rows[0].seed, 1);
        let b = run_simulation(&exp).unwrap();
        assert_eq!(a.report.to_csv_string(), b.report.to_csv_string());
        for r in &a.report.rows {
            assert!(r.risk >= 0.0 && r.risk <= r.lambda.max(1.0 - r.lambda));
        }
    }

    #[test]
    fn saved_rule_evaluates_like_the_run() {
        let train = generate(&SimConfig::new(200, Setting::ObservedU, 5)).unwrap().dataset;
        let test = generate(&SimConfig::new(200, Setting::ObservedU, 6)).unwrap().dataset;
        let mut c = common(vec![LearnerKind::Logistic, LearnerKind::Knn]);
        c.seeds = vec![4];
        c.lambdas = vec![0.5];
        let fit = fit_full(&train, &c, 4).unwrap();
        let rule: EnsembleRule = fit.rules[2].to_string().parse().unwrap();
        let test_std = fit.params.apply_dataset(&test).unwrap();
        let direct = out_of_sample_eval(&fit.rules[2], &fit.stack.models, &test_std, LossSpec::new(0.5).unwrap()).unwrap();
        assert_eq!(evaluate_rule(&rule, &train, &test).unwrap(), direct);
    }
}
