//! Base learners behind a single fit/predict surface.
//!
//! Every learner maps a feature row to a real score. Probability-type
//! learners return a positive-class probability estimate; the linear SVM
//! returns its margin through the logistic map so all columns of a library
//! share the unit interval.

mod boosting;
mod knn;
mod logistic;
mod spec;
mod svm;
mod tree;

use ndarray::ArrayView2;
use thiserror::Error;

use crate::data::Dataset;

pub use boosting::BoostedStumps;
pub use knn::KnnModel;
pub use logistic::{LogisticModel, QuadAdditiveModel};
pub use spec::{library, LearnerKind, LearnerSpec, EIGHT_LEARNERS, FOUR_LEARNERS};
pub use svm::LinearSvm;
pub use tree::{Forest, Tree};

use logistic::IrlsOptions;
use tree::{ColumnData, TreeParams};

#[derive(Debug, Error, PartialEq)]
pub enum LearnerError {
    #[error("unknown learner kind `{0}`")]
    UnknownKind(String),
    #[error("{kind} has no parameter `{key}`")]
    UnknownParameter { kind: LearnerKind, key: String },
    #[error("{kind}.{key}: {reason}")]
    InvalidParameter {
        kind: LearnerKind,
        key: String,
        reason: String,
    },
    #[error("cannot parse learner spec `{0}`")]
    Parse(String),
    #[error("training data contains a single class")]
    SingleClass,
    #[error("model expects {expected} feature columns, got {got}")]
    ShapeMismatch { expected: usize, got: usize },
    #[error("echo feature {feature} out of range for {p} columns")]
    EchoFeatureOutOfRange { feature: usize, p: usize },
}

#[derive(Debug, Clone)]
enum State {
    Logistic(LogisticModel),
    QuadAdditive(QuadAdditiveModel),
    Tree(Tree),
    Forest(Forest),
    Knn(KnnModel),
    Boosted(BoostedStumps),
    Svm(LinearSvm),
    Echo(usize),
}

/// A trained learner. Immutable after [`fit`].
#[derive(Debug, Clone)]
pub struct FittedModel {
    pub spec: LearnerSpec,
    pub feature_count: usize,
    state: State,
}

impl FittedModel {
    /// `false` only when IRLS hit its iteration cap; the best iterate is used.
    pub fn converged(&self) -> bool {
        match &self.state {
            State::Logistic(m) => m.converged,
            State::QuadAdditive(m) => m.logistic.converged,
            _ => true,
        }
    }

    pub fn logistic(&self) -> Option<&LogisticModel> {
        match &self.state {
            State::Logistic(m) => Some(m),
            State::QuadAdditive(m) => Some(&m.logistic),
            _ => None,
        }
    }

    pub fn tree(&self) -> Option<&Tree> {
        match &self.state {
            State::Tree(t) => Some(t),
            _ => None,
        }
    }
}

fn irls_options(spec: &LearnerSpec) -> IrlsOptions {
    IrlsOptions {
        ridge: spec.param("ridge"),
        max_iter: spec.count("max_iter"),
        tol: spec.param("tol"),
    }
}

fn depth_param(spec: &LearnerSpec) -> usize {
    match spec.count("max_depth") {
        0 => usize::MAX,
        d => d,
    }
}

/// Fit one learner to `d`. Deterministic in `(spec, d)`.
pub fn fit(spec: &LearnerSpec, d: &Dataset) -> Result<FittedModel, LearnerError> {
    spec.validate()?;
    if !d.has_both_classes() {
        return Err(LearnerError::SingleClass);
    }
    let x = d.features();
    let y = d.labels();
    let p = d.p();
    let state = match spec.kind {
        LearnerKind::Logistic => State::Logistic(logistic::fit_irls(x, y, irls_options(spec))),
        LearnerKind::QuadAdditive => State::QuadAdditive(QuadAdditiveModel::fit(x, y, irls_options(spec))),
        LearnerKind::Cart => {
            let params = TreeParams {
                max_depth: depth_param(spec),
                min_leaf: spec.count("min_leaf"),
                mtry: None,
            };
            let weights = vec![1u32; d.n()];
            let mut rng = crate::seed::rng(spec.seed);
            State::Tree(tree::grow(&ColumnData::new(x), y, &weights, params, &mut rng))
        }
        LearnerKind::RandomForest => {
            let mtry = match spec.count("mtry") {
                0 => ((p as f64).sqrt().floor() as usize).max(1),
                m => m.min(p),
            };
            let params = TreeParams {
                max_depth: depth_param(spec),
                min_leaf: spec.count("min_leaf"),
                mtry: Some(mtry),
            };
            State::Forest(Forest::fit(&ColumnData::new(x), y, spec.count("trees"), params, spec.seed))
        }
        LearnerKind::BaggedTrees => {
            let params = TreeParams {
                max_depth: depth_param(spec),
                min_leaf: spec.count("min_leaf"),
                mtry: None,
            };
            State::Forest(Forest::fit(&ColumnData::new(x), y, spec.count("trees"), params, spec.seed))
        }
        LearnerKind::Knn => State::Knn(KnnModel::fit(x, y, spec.count("k"))),
        LearnerKind::BoostedStumps => State::Boosted(BoostedStumps::fit(
            &ColumnData::new(x),
            y,
            spec.count("rounds"),
            spec.param("shrinkage"),
            spec.count("min_leaf"),
        )),
        LearnerKind::LinearSvm => State::Svm(LinearSvm::fit(x, y, spec.param("c"), spec.count("iterations"))),
        LearnerKind::Echo => {
            let feature = spec.count("feature");
            if feature >= p {
                return Err(LearnerError::EchoFeatureOutOfRange { feature, p });
            }
            State::Echo(feature)
        }
    };
    Ok(FittedModel {
        spec: spec.clone(),
        feature_count: p,
        state,
    })
}

/// Scores for each row of `x`.
pub fn predict(model: &FittedModel, x: ArrayView2<'_, f64>) -> Result<Vec<f64>, LearnerError> {
    if x.ncols() != model.feature_count {
        return Err(LearnerError::ShapeMismatch {
            expected: model.feature_count,
            got: x.ncols(),
        });
    }
    if x.nrows() == 0 {
        return Ok(Vec::new());
    }
    let rows = || x.rows().into_iter();
    Ok(match &model.state {
        State::Logistic(m) => m.predict(x),
        State::QuadAdditive(m) => m.predict(x),
        State::Tree(t) => rows().map(|r| t.predict_row(|j| r[j])).collect(),
        State::Forest(f) => rows().map(|r| f.predict_row(|j| r[j])).collect(),
        State::Knn(m) => m.predict(x),
        State::Boosted(m) => rows().map(|r| m.predict_row(|j| r[j])).collect(),
        State::Svm(m) => m.predict(x),
        State::Echo(j) => x.column(*j).to_vec(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::Array2;
    use rand::Rng;

    fn toy(n: usize, seed: u64) -> Dataset {
        let mut rng = crate::seed::rng(seed);
        let x = Array2::from_shape_fn((n, 3), |_| rng.random_range(-1.0..1.0));
        let y = x
            .rows()
            .into_iter()
            .map(|r| u8::from(r[0] + 0.5 * r[1] + 0.3 * rng.random_range(-1.0..1.0) > 0.0))
            .collect();
        Dataset::from_features(x, y).unwrap()
    }

    fn cheap(kind: LearnerKind) -> LearnerSpec {
        let s = LearnerSpec::new(kind, 7);
        match kind {
            LearnerKind::RandomForest | LearnerKind::BaggedTrees => s.with("trees", 20.0).unwrap(),
            _ => s,
        }
    }

    #[test]
    fn every_kind_gives_finite_unit_scores() {
        let d = toy(120, 1);
        for kind in LearnerKind::ALL {
            let m = fit(&cheap(kind), &d).unwrap();
            let p = predict(&m, d.features()).unwrap();
            assert_eq!(p.len(), 120);
            assert!(p.iter().all(|v| v.is_finite()), "{kind}");
            if kind != LearnerKind::Echo {
                assert!(p.iter().all(|v| (0.0..=1.0).contains(v)), "{kind}");
            }
        }
    }

    #[test]
    fn shape_and_empty_inputs() {
        let d = toy(50, 2);
        let m = fit(&cheap(LearnerKind::Cart), &d).unwrap();
        let wrong = Array2::<f64>::zeros((4, 2));
        assert_eq!(
            predict(&m, wrong.view()),
            Err(LearnerError::ShapeMismatch { expected: 3, got: 2 })
        );
        let empty = Array2::<f64>::zeros((0, 3));
        assert!(predict(&m, empty.view()).unwrap().is_empty());
    }

    #[test]
    fn single_class_rejected() {
        let x = Array2::from_shape_fn((10, 1), |(i, _)| i as f64);
        let d = Dataset::from_features(x, vec![0; 10]).unwrap();
        assert_eq!(fit(&cheap(LearnerKind::Knn), &d).unwrap_err(), LearnerError::SingleClass);
    }

    #[test]
    fn forest_is_deterministic_and_pure_on_separated_points() {
        let x = Array2::from_shape_fn((60, 2), |(i, j)| {
            let side = if i < 30 { -5.0 } else { 5.0 };
            if j == 0 {
                side + i as f64 * 0.01
            } else {
                0.0
            }
        });
        let y: Vec<u8> = (0..60).map(|i| u8::from(i >= 30)).collect();
        let d = Dataset::from_features(x, y.clone()).unwrap();
        let spec = LearnerSpec::new(LearnerKind::RandomForest, 3).with("trees", 50.0).unwrap();
        let a = predict(&fit(&spec, &d).unwrap(), d.features()).unwrap();
        let b = predict(&fit(&spec, &d).unwrap(), d.features()).unwrap();
        assert_eq!(a, b);
        for (s, yi) in a.iter().zip(&y) {
            assert_eq!(*s, f64::from(*yi));
        }
    }

    #[test]
    fn permutation_equivariance_for_deterministic_learners() {
        let d = toy(80, 4);
        let perm: Vec<usize> = (0..80).rev().collect();
        let shuffled = d.subset(&perm).unwrap();
        let probe = toy(25, 9);
        for kind in [LearnerKind::Knn, LearnerKind::Logistic, LearnerKind::QuadAdditive] {
            let a = predict(&fit(&cheap(kind), &d).unwrap(), probe.features()).unwrap();
            let b = predict(&fit(&cheap(kind), &shuffled).unwrap(), probe.features()).unwrap();
            for (u, v) in a.iter().zip(&b) {
                assert!((u - v).abs() <= 1e-10, "{kind}: {u} vs {v}");
            }
        }
    }

    #[test]
    fn echo_checks_feature_index() {
        let d = toy(20, 5);
        let spec = LearnerSpec::new(LearnerKind::Echo, 0).with("feature", 3.0).unwrap();
        assert_eq!(
            fit(&spec, &d).unwrap_err(),
            LearnerError::EchoFeatureOutOfRange { feature: 3, p: 3 }
        );
    }
}
