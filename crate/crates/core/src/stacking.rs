//! Library score matrices: full-data fits and the cross-validated `Z`.

use std::path::Path;

use ndarray::{Array2, ArrayView2};
use rayon::prelude::*;
use thiserror::Error;

use crate::data::{Dataset, FoldPlan};
use crate::learners::{self, FittedModel, LearnerError, LearnerSpec};

#[derive(Debug, Error)]
pub enum StackingError {
    #[error("library is empty")]
    EmptyLibrary,
    #[error("learner {index} ({spec}): {source}")]
    Learner {
        index: usize,
        spec: String,
        #[source]
        source: LearnerError,
    },
    #[error("training split of fold {0} lacks one class")]
    FoldMissingClass(usize),
    #[error("fold plan covers {plan} rows but the dataset has {n}")]
    PlanMismatch { plan: usize, n: usize },
    #[error("score matrix has {rows}×{cols} values for {learners} learners")]
    Shape { rows: usize, cols: usize, learners: usize },
    #[error("non-finite score at row {row}, learner {learner}")]
    NonFinite { row: usize, learner: usize },
    #[error("writing score dump: {0}")]
    Io(String),
}

#[derive(Debug, Clone, PartialEq)]
pub enum Provenance {
    FullData,
    CrossValidated(FoldPlan),
}

/// `n × K` library scores with the learners that produced them.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreMatrix {
    values: Array2<f64>,
    learners: Vec<LearnerSpec>,
    provenance: Provenance,
}

impl ScoreMatrix {
    pub fn new(values: Array2<f64>, learners: Vec<LearnerSpec>, provenance: Provenance) -> Result<Self, StackingError> {
        if learners.is_empty() {
            return Err(StackingError::EmptyLibrary);
        }
        if values.ncols() != learners.len() {
            return Err(StackingError::Shape {
                rows: values.nrows(),
                cols: values.ncols(),
                learners: learners.len(),
            });
        }
        if let Some(((row, learner), _)) = values.indexed_iter().find(|(_, v)| !v.is_finite()) {
            return Err(StackingError::NonFinite { row, learner });
        }
        Ok(Self {
            values,
            learners,
            provenance,
        })
    }

    pub fn values(&self) -> ArrayView2<'_, f64> {
        self.values.view()
    }

    pub fn learners(&self) -> &[LearnerSpec] {
        &self.learners
    }

    pub fn provenance(&self) -> &Provenance {
        &self.provenance
    }

    pub fn n(&self) -> usize {
        self.values.nrows()
    }

    pub fn k(&self) -> usize {
        self.values.ncols()
    }

    pub fn column(&self, k: usize) -> Vec<f64> {
        self.values.column(k).to_vec()
    }

    /// Keep the given rows, in order.
    pub fn select_rows(&self, rows: &[usize]) -> Self {
        Self {
            values: self.values.select(ndarray::Axis(0), rows),
            learners: self.learners.clone(),
            provenance: self.provenance.clone(),
        }
    }

    /// CSV with header `row,learner_1,…,learner_K,label`.
    pub fn write_csv(&self, path: impl AsRef<Path>, labels: &[u8]) -> Result<(), StackingError> {
        let io = |e: csv::Error| StackingError::Io(e.to_string());
        let mut w = csv::Writer::from_path(path).map_err(io)?;
        let mut header = vec!["row".to_owned()];
        header.extend((1..=self.k()).map(|k| format!("learner_{k}")));
        header.push("label".to_owned());
        w.write_record(&header).map_err(io)?;
        for (i, row) in self.values.rows().into_iter().enumerate() {
            let mut rec = vec![i.to_string()];
            rec.extend(row.iter().map(f64::to_string));
            rec.push(labels.get(i).map_or_else(String::new, u8::to_string));
            w.write_record(&rec).map_err(io)?;
        }
        w.flush().map_err(|e| StackingError::Io(e.to_string()))
    }
}

fn learner_error(index: usize, spec: &LearnerSpec, source: LearnerError) -> StackingError {
    StackingError::Learner {
        index,
        spec: spec.to_string(),
        source,
    }
}

fn check_scores(scores: &[f64], rows: &[usize], learner: usize) -> Result<(), StackingError> {
    match scores.iter().position(|v| !v.is_finite()) {
        Some(i) => Err(StackingError::NonFinite {
            row: rows[i],
            learner,
        }),
        None => Ok(()),
    }
}

/// Fit every learner on all of `d` and score `d` itself.
pub fn full_predictions(library: &[LearnerSpec], d: &Dataset) -> Result<(ScoreMatrix, Vec<FittedModel>), StackingError> {
    if library.is_empty() {
        return Err(StackingError::EmptyLibrary);
    }
    let all: Vec<usize> = (0..d.n()).collect();
    let fitted: Vec<(FittedModel, Vec<f64>)> = library
        .par_iter()
        .enumerate()
        .map(|(k, spec)| {
            let m = learners::fit(spec, d).map_err(|e| learner_error(k, spec, e))?;
            let p = learners::predict(&m, d.features()).map_err(|e| learner_error(k, spec, e))?;
            check_scores(&p, &all, k)?;
            Ok((m, p))
        })
        .collect::<Result<_, StackingError>>()?;
    let mut values = Array2::zeros((d.n(), library.len()));
    let mut models = Vec::with_capacity(library.len());
    for (k, (m, p)) in fitted.into_iter().enumerate() {
        values.column_mut(k).assign(&ndarray::ArrayView1::from(&p));
        models.push(m);
    }
    let z = ScoreMatrix::new(values, library.to_vec(), Provenance::FullData)?;
    Ok((z, models))
}

/// Out-of-fold scores: row `i`, column `k` comes from learner `k` fit
/// without the fold containing `i`.
pub fn cv_predictions(library: &[LearnerSpec], d: &Dataset, plan: &FoldPlan) -> Result<ScoreMatrix, StackingError> {
    if library.is_empty() {
        return Err(StackingError::EmptyLibrary);
    }
    if plan.n() != d.n() {
        return Err(StackingError::PlanMismatch { plan: plan.n(), n: d.n() });
    }
    let mut splits = Vec::with_capacity(plan.folds());
    for f in 0..plan.folds() {
        let train_idx = plan.training(f);
        let train = d
            .subset(&train_idx)
            .map_err(|_| StackingError::FoldMissingClass(f))?;
        if !train.has_both_classes() {
            return Err(StackingError::FoldMissingClass(f));
        }
        let valid = plan.validation(f);
        let valid_x = d.features().select(ndarray::Axis(0), &valid);
        splits.push((train, valid, valid_x));
    }
    let jobs: Vec<(usize, usize)> = (0..plan.folds())
        .flat_map(|f| (0..library.len()).map(move |k| (f, k)))
        .collect();
    let outputs: Vec<Vec<f64>> = jobs
        .par_iter()
        .map(|&(f, k)| {
            let (train, valid, valid_x) = &splits[f];
            let spec = &library[k];
            let m = learners::fit(spec, train).map_err(|e| learner_error(k, spec, e))?;
            let p = learners::predict(&m, valid_x.view()).map_err(|e| learner_error(k, spec, e))?;
            check_scores(&p, valid, k)?;
            Ok(p)
        })
        .collect::<Result<_, StackingError>>()?;
    let mut values = Array2::zeros((d.n(), library.len()));
    for (&(f, k), p) in jobs.iter().zip(outputs) {
        for (&row, v) in splits[f].1.iter().zip(p) {
            values[[row, k]] = v;
        }
    }
    ScoreMatrix::new(values, library.to_vec(), Provenance::CrossValidated(plan.clone()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::make_folds;
    use crate::learners::LearnerKind;

    fn data(n: usize) -> Dataset {
        let x = Array2::from_shape_fn((n, 2), |(i, j)| ((i * 7 + j * 3) % 11) as f64 + i as f64 * 0.001);
        let y = (0..n).map(|i| u8::from((i * 7) % 11 > 5)).collect();
        Dataset::from_features(x, y).unwrap()
    }

    #[test]
    fn nearest_neighbour_full_column_equals_labels() {
        let d = data(40);
        let lib = vec![LearnerSpec::new(LearnerKind::Knn, 0).with("k", 1.0).unwrap()];
        let (z, models) = full_predictions(&lib, &d).unwrap();
        assert_eq!(models.len(), 1);
        let labels: Vec<f64> = d.labels().iter().map(|&v| f64::from(v)).collect();
        assert_eq!(z.column(0), labels);
        assert_eq!(z.provenance(), &Provenance::FullData);
    }

    #[test]
    fn duplicate_specs_give_identical_columns() {
        let d = data(50);
        let spec = LearnerSpec::new(LearnerKind::Cart, 3);
        let (z, _) = full_predictions(&[spec.clone(), spec], &d).unwrap();
        assert_eq!(z.column(0), z.column(1));
    }

    #[test]
    fn constant_learner_gives_training_prevalence() {
        let d = data(30);
        let plan = make_folds(30, 2, d.labels(), 1).unwrap();
        let spec = LearnerSpec::new(LearnerKind::Cart, 0).with("min_leaf", 30.0).unwrap();
        let z = cv_predictions(&[spec], &d, &plan).unwrap();
        for f in 0..2 {
            let train = plan.training(f);
            let prev = train.iter().filter(|&&i| d.labels()[i] == 1).count() as f64 / train.len() as f64;
            for i in plan.validation(f) {
                assert!((z.values()[[i, 0]] - prev).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn echo_column_keeps_row_order() {
        let d = data(33);
        let plan = make_folds(33, 5, d.labels(), 4).unwrap();
        let spec = LearnerSpec::new(LearnerKind::Echo, 0).with("feature", 1.0).unwrap();
        let z = cv_predictions(&[spec], &d, &plan).unwrap();
        assert_eq!(z.column(0), d.features().column(1).to_vec());
    }

    #[test]
    fn fold_missing_class() {
        let x = Array2::from_shape_fn((6, 1), |(i, _)| i as f64);
        let d = Dataset::from_features(x, vec![1, 0, 0, 0, 0, 0]).unwrap();
        // the lone positive sits in fold 0; every other fold still trains on it
        let plan = FoldPlan::from_assignments(vec![0, 1, 1, 1, 1, 1], 2).unwrap();
        let spec = LearnerSpec::new(LearnerKind::Knn, 0);
        assert!(matches!(
            cv_predictions(&[spec], &d, &plan),
            Err(StackingError::FoldMissingClass(0))
        ));
    }

    #[test]
    fn rejects_non_finite_and_shape() {
        let spec = LearnerSpec::new(LearnerKind::Knn, 0);
        let bad = Array2::from_shape_vec((2, 1), vec![0.0, f64::NAN]).unwrap();
        assert!(matches!(
            ScoreMatrix::new(bad, vec![spec.clone()], Provenance::FullData),
            Err(StackingError::NonFinite { row: 1, learner: 0 })
        ));
        assert!(ScoreMatrix::new(Array2::zeros((2, 2)), vec![spec], Provenance::FullData).is_err());
    }

    #[test]
    fn write_dump() {
        let d = data(5);
        let spec = LearnerSpec::new(LearnerKind::Echo, 0);
        let (z, _) = full_predictions(&[spec], &d).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("z.csv");
        z.write_csv(&path, d.labels()).unwrap();
        let text = std::fs::read_to_string(path).unwrap();
        assert!(text.starts_with("row,learner_1,label\n0,"));
        assert_eq!(text.lines().count(), 6);
    }
}
