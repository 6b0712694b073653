//! Datasets, CSV ingestion, standardization and fold construction.

use std::collections::BTreeSet;
use std::fmt;
use std::path::Path;

use ndarray::{Array2, ArrayView2, Axis};
use rand::seq::SliceRandom;
use thiserror::Error;

use crate::seed;

#[derive(Debug, Error, PartialEq)]
pub enum DataError {
    #[error("file not found: {0}")]
    MissingFile(String),
    #[error("csv: {0}")]
    Csv(String),
    #[error("label column `{0}` not present in header")]
    LabelColumnMissing(String),
    #[error("non-numeric cell `{value}` at row {row}, column `{column}`")]
    NonNumericCell {
        row: usize,
        column: String,
        value: String,
    },
    #[error("missing value at row {row}, column `{column}` (use --impute-indicator)")]
    MissingValue { row: usize, column: String },
    #[error("feature column `{0}` has a single unique value")]
    ConstantColumn(String),
    #[error("label column must contain exactly two distinct values, found {0:?}")]
    LabelNotBinary(Vec<String>),
    #[error("positive level `{0}` does not occur in the label column")]
    UnknownPositiveLevel(String),
    #[error("continuous column `{0}` has zero variance")]
    ZeroVariance(String),
    #[error("cannot build {folds} folds from {n} observations")]
    TooManyFolds { n: usize, folds: usize },
    #[error("fold count must be at least 2, got {0}")]
    TooFewFolds(usize),
    #[error("invalid dataset: {0}")]
    Invalid(String),
}

/// Whether a feature is treated as continuous or two-level.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ColumnKind {
    Continuous,
    Binary,
}

impl fmt::Display for ColumnKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ColumnKind::Continuous => f.write_str("continuous"),
            ColumnKind::Binary => f.write_str("binary"),
        }
    }
}

/// Feature matrix with binary labels.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    features: Array2<f64>,
    labels: Vec<u8>,
    column_kinds: Vec<ColumnKind>,
    column_names: Vec<String>,
}

impl Dataset {
    pub fn new(
        features: Array2<f64>,
        labels: Vec<u8>,
        column_kinds: Vec<ColumnKind>,
        column_names: Vec<String>,
    ) -> Result<Self, DataError> {
        let (n, p) = features.dim();
        if n < 2 {
            return Err(DataError::Invalid(format!("need at least 2 rows, got {n}")));
        }
        if labels.len() != n {
            return Err(DataError::Invalid(format!(
                "{} labels for {n} rows",
                labels.len()
            )));
        }
        if column_kinds.len() != p || column_names.len() != p {
            return Err(DataError::Invalid(format!(
                "column metadata does not match {p} feature columns"
            )));
        }
        if labels.iter().any(|&y| y > 1) {
            return Err(DataError::Invalid("labels must be 0 or 1".into()));
        }
        if features.iter().any(|v| !v.is_finite()) {
            return Err(DataError::Invalid("features must be finite".into()));
        }
        Ok(Self {
            features,
            labels,
            column_kinds,
            column_names,
        })
    }

    /// Dataset with all columns continuous and generic names `x1..xp`.
    pub fn from_features(features: Array2<f64>, labels: Vec<u8>) -> Result<Self, DataError> {
        let p = features.ncols();
        let names = (1..=p).map(|j| format!("x{j}")).collect();
        Self::new(features, labels, vec![ColumnKind::Continuous; p], names)
    }

    pub fn n(&self) -> usize {
        self.labels.len()
    }

    pub fn p(&self) -> usize {
        self.features.ncols()
    }

    pub fn features(&self) -> ArrayView2<'_, f64> {
        self.features.view()
    }

    pub fn labels(&self) -> &[u8] {
        &self.labels
    }

    pub fn column_kinds(&self) -> &[ColumnKind] {
        &self.column_kinds
    }

    pub fn column_names(&self) -> &[String] {
        &self.column_names
    }

    pub fn positives(&self) -> usize {
        self.labels.iter().filter(|&&y| y == 1).count()
    }

    pub fn prevalence(&self) -> f64 {
        self.positives() as f64 / self.n() as f64
    }

    pub fn has_both_classes(&self) -> bool {
        let pos = self.positives();
        pos > 0 && pos < self.n()
    }

    /// Rows `idx` in the given order. Fails if fewer than two rows are kept.
    pub fn subset(&self, idx: &[usize]) -> Result<Dataset, DataError> {
        let features = self.features.select(Axis(0), idx);
        let labels = idx.iter().map(|&i| self.labels[i]).collect();
        Dataset::new(
            features,
            labels,
            self.column_kinds.clone(),
            self.column_names.clone(),
        )
    }

    /// Same labels and metadata, new feature values.
    pub fn with_features(&self, features: Array2<f64>) -> Result<Dataset, DataError> {
        Dataset::new(
            features,
            self.labels.clone(),
            self.column_kinds.clone(),
            self.column_names.clone(),
        )
    }
}

/// Options for [`load_csv`].
#[derive(Debug, Clone, Default)]
pub struct LoadOptions {
    pub label_column: String,
    /// Label value mapped to 1. Defaults to the lexicographically larger level.
    pub positive_level: Option<String>,
    /// Replace missing cells by 0 and add a `<name>_missing` indicator column.
    pub impute_indicator: bool,
    /// Columns dropped before parsing (identifiers and the like).
    pub ignore_columns: Vec<String>,
}

impl LoadOptions {
    pub fn new(label_column: impl Into<String>) -> Self {
        Self {
            label_column: label_column.into(),
            ..Self::default()
        }
    }
}

fn is_missing(cell: &str) -> bool {
    matches!(cell, "" | "NA" | "na" | "NaN" | "nan" | "?")
}

/// Read a comma-separated file with a header row into a [`Dataset`].
pub fn load_csv(path: impl AsRef<Path>, opts: &LoadOptions) -> Result<Dataset, DataError> {
    let path = path.as_ref();
    if !path.exists() {
        return Err(DataError::MissingFile(path.display().to_string()));
    }
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| DataError::Csv(e.to_string()))?;
    let header: Vec<String> = reader
        .headers()
        .map_err(|e| DataError::Csv(e.to_string()))?
        .iter()
        .map(str::to_owned)
        .collect();
    let label_idx = header
        .iter()
        .position(|h| *h == opts.label_column)
        .ok_or_else(|| DataError::LabelColumnMissing(opts.label_column.clone()))?;
    let feature_idx: Vec<usize> = (0..header.len())
        .filter(|&j| j != label_idx && !opts.ignore_columns.contains(&header[j]))
        .collect();

    let mut raw_labels = Vec::new();
    let mut columns: Vec<Vec<Option<f64>>> = vec![Vec::new(); feature_idx.len()];
    for (r, record) in reader.records().enumerate() {
        let record = record.map_err(|e| DataError::Csv(e.to_string()))?;
        // 1-based data row numbers, header excluded
        let row = r + 1;
        raw_labels.push(record.get(label_idx).unwrap_or("").to_owned());
        for (c, &j) in feature_idx.iter().enumerate() {
            let cell = record.get(j).unwrap_or("");
            if is_missing(cell) {
                if !opts.impute_indicator {
                    return Err(DataError::MissingValue {
                        row,
                        column: header[j].clone(),
                    });
                }
                columns[c].push(None);
            } else {
                let v: f64 = cell.parse().map_err(|_| DataError::NonNumericCell {
                    row,
                    column: header[j].clone(),
                    value: cell.to_owned(),
                })?;
                if !v.is_finite() {
                    return Err(DataError::NonNumericCell {
                        row,
                        column: header[j].clone(),
                        value: cell.to_owned(),
                    });
                }
                columns[c].push(Some(v));
            }
        }
    }

    let levels: BTreeSet<&str> = raw_labels.iter().map(String::as_str).collect();
    if levels.len() != 2 {
        return Err(DataError::LabelNotBinary(
            levels.into_iter().map(str::to_owned).collect(),
        ));
    }
    let positive = match &opts.positive_level {
        Some(level) => {
            if !levels.contains(level.as_str()) {
                return Err(DataError::UnknownPositiveLevel(level.clone()));
            }
            level.clone()
        }
        None => levels.iter().next_back().map(|s| (*s).to_owned()).unwrap_or_default(),
    };
    let labels: Vec<u8> = raw_labels.iter().map(|l| u8::from(*l == positive)).collect();

    let mut names = Vec::new();
    let mut values: Vec<Vec<f64>> = Vec::new();
    for (c, &j) in feature_idx.iter().enumerate() {
        let col = &columns[c];
        let has_missing = col.iter().any(Option::is_none);
        values.push(col.iter().map(|v| v.unwrap_or(0.0)).collect());
        names.push(header[j].clone());
        if has_missing {
            values.push(col.iter().map(|v| if v.is_none() { 1.0 } else { 0.0 }).collect());
            names.push(format!("{}_missing", header[j]));
        }
    }

    let mut kinds = Vec::with_capacity(values.len());
    for (col, name) in values.iter().zip(&names) {
        let distinct = distinct_count(col);
        if distinct < 2 {
            return Err(DataError::ConstantColumn(name.clone()));
        }
        kinds.push(if distinct == 2 {
            ColumnKind::Binary
        } else {
            ColumnKind::Continuous
        });
    }

    let n = labels.len();
    let p = values.len();
    let features = Array2::from_shape_fn((n, p), |(i, j)| values[j][i]);
    Dataset::new(features, labels, kinds, names)
}

fn distinct_count(col: &[f64]) -> usize {
    let mut v: Vec<f64> = col.to_vec();
    v.sort_by(f64::total_cmp);
    v.dedup();
    v.len()
}

/// Per-column affine map fitted by [`standardize`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ColumnTransform {
    /// `(x - mean) / sd`
    Continuous { mean: f64, sd: f64 },
    /// `low -> -1`, `high -> +1`
    Binary { low: f64, high: f64 },
}

impl ColumnTransform {
    fn forward(&self, x: f64) -> f64 {
        match *self {
            ColumnTransform::Continuous { mean, sd } => (x - mean) / sd,
            ColumnTransform::Binary { low, high } => -1.0 + 2.0 * (x - low) / (high - low),
        }
    }

    fn inverse(&self, z: f64) -> f64 {
        match *self {
            ColumnTransform::Continuous { mean, sd } => z * sd + mean,
            ColumnTransform::Binary { low, high } => low + (z + 1.0) * (high - low) / 2.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StandardizationParams {
    pub columns: Vec<ColumnTransform>,
}

impl StandardizationParams {
    pub fn apply(&self, features: ArrayView2<'_, f64>) -> Array2<f64> {
        assert_eq!(features.ncols(), self.columns.len(), "column count mismatch");
        let mut out = features.to_owned();
        for (mut col, t) in out.columns_mut().into_iter().zip(&self.columns) {
            col.mapv_inplace(|x| t.forward(x));
        }
        out
    }

    pub fn inverse(&self, features: ArrayView2<'_, f64>) -> Array2<f64> {
        assert_eq!(features.ncols(), self.columns.len(), "column count mismatch");
        let mut out = features.to_owned();
        for (mut col, t) in out.columns_mut().into_iter().zip(&self.columns) {
            col.mapv_inplace(|z| t.inverse(z));
        }
        out
    }

    /// Apply to another dataset with the same columns.
    pub fn apply_dataset(&self, d: &Dataset) -> Result<Dataset, DataError> {
        d.with_features(self.apply(d.features()))
    }
}

/// Continuous columns to mean 0 / sd 1 (n−1 denominator); binary columns to ±1.
pub fn standardize(d: &Dataset) -> Result<(Dataset, StandardizationParams), DataError> {
    let n = d.n() as f64;
    let mut columns = Vec::with_capacity(d.p());
    for (j, col) in d.features.columns().into_iter().enumerate() {
        let t = match d.column_kinds[j] {
            ColumnKind::Continuous => {
                let mean = col.sum() / n;
                let var = col.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
                let sd = var.sqrt();
                if !(sd > 0.0) {
                    return Err(DataError::ZeroVariance(d.column_names[j].clone()));
                }
                ColumnTransform::Continuous { mean, sd }
            }
            ColumnKind::Binary => {
                let low = col.iter().copied().fold(f64::INFINITY, f64::min);
                let high = col.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                if !(high > low) {
                    return Err(DataError::ZeroVariance(d.column_names[j].clone()));
                }
                ColumnTransform::Binary { low, high }
            }
        };
        columns.push(t);
    }
    let params = StandardizationParams { columns };
    let out = params.apply_dataset(d)?;
    Ok((out, params))
}

/// Assignment of each observation to one of `folds` validation folds.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FoldPlan {
    assignments: Vec<usize>,
    folds: usize,
}

impl FoldPlan {
    /// Build from explicit 0-based assignments. Every fold must be non-empty.
    pub fn from_assignments(assignments: Vec<usize>, folds: usize) -> Result<Self, DataError> {
        if folds < 2 {
            return Err(DataError::TooFewFolds(folds));
        }
        let mut sizes = vec![0usize; folds];
        for &a in &assignments {
            if a >= folds {
                return Err(DataError::Invalid(format!("fold index {a} out of range")));
            }
            sizes[a] += 1;
        }
        if sizes.contains(&0) {
            return Err(DataError::Invalid("empty fold".into()));
        }
        Ok(Self { assignments, folds })
    }

    pub fn folds(&self) -> usize {
        self.folds
    }

    pub fn n(&self) -> usize {
        self.assignments.len()
    }

    /// 0-based fold of each observation.
    pub fn assignments(&self) -> &[usize] {
        &self.assignments
    }

    pub fn validation(&self, fold: usize) -> Vec<usize> {
        (0..self.n()).filter(|&i| self.assignments[i] == fold).collect()
    }

    pub fn training(&self, fold: usize) -> Vec<usize> {
        (0..self.n()).filter(|&i| self.assignments[i] != fold).collect()
    }

    pub fn fold_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.folds];
        for &a in &self.assignments {
            sizes[a] += 1;
        }
        sizes
    }
}

/// Stratified, seeded partition of `n` indices into `folds` folds.
///
/// Positives and negatives are shuffled separately and dealt round-robin with
/// one running counter, so per-class counts and total fold sizes each differ
/// by at most one across folds.
pub fn make_folds(n: usize, folds: usize, labels: &[u8], seed: u64) -> Result<FoldPlan, DataError> {
    if folds < 2 {
        return Err(DataError::TooFewFolds(folds));
    }
    if folds > n {
        return Err(DataError::TooManyFolds { n, folds });
    }
    if labels.len() != n {
        return Err(DataError::Invalid(format!("{} labels for n = {n}", labels.len())));
    }
    let mut rng = seed::rng(seed);
    let mut pos: Vec<usize> = (0..n).filter(|&i| labels[i] == 1).collect();
    let mut neg: Vec<usize> = (0..n).filter(|&i| labels[i] != 1).collect();
    pos.shuffle(&mut rng);
    neg.shuffle(&mut rng);
    let mut assignments = vec![0usize; n];
    for (slot, &i) in pos.iter().chain(neg.iter()).enumerate() {
        assignments[i] = slot % folds;
    }
    FoldPlan::from_assignments(assignments, folds)
}
