//! Classification rules `1{Ψ(x) ≥ c}` derived from a stacked ensemble of base
//! learners under a weighted misclassification loss.
//!
//! The crate is organised bottom-up:
//!
//! - [`data`]: datasets, CSV ingestion, standardization and fold plans.
//! - [`loss`]: the weighted loss, empirical risk and relative difference.
//! - [`learners`]: the base-learner library behind one fit/predict surface.
//! - [`stacking`]: full-data and cross-validated score matrices.
//! - [`combiner`]: NNLS, exact threshold line search and the three rule
//!   derivation strategies (conditional, two-step, CRS joint).
//! - [`optimizer`]: controlled random search with local mutation (CRS2-LM).
//! - [`simulation`]: the two latent-score data-generating mechanisms and
//!   their Bayes rule.
//! - [`evaluation`] and [`experiment`]: out-of-sample and cross-validated
//!   risk, report tables and the end-to-end experiment runners.

// `!(x > 0.0)` is used on purpose so that NaN takes the rejecting branch.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod combiner;
pub mod data;
pub mod evaluation;
pub mod experiment;
pub mod learners;
mod linalg;
pub mod loss;
pub mod optimizer;
pub mod seed;
pub mod simulation;
pub mod stacking;

mod error;

pub use combiner::{EnsembleRule, Method};
pub use data::{Dataset, FoldPlan};
pub use error::{Error, Result};
pub use learners::{FittedModel, LearnerKind, LearnerSpec};
pub use loss::LossSpec;
pub use optimizer::CrsOptions;
pub use stacking::ScoreMatrix;
