use thiserror::Error;

use crate::{combiner, data, evaluation, learners, loss, optimizer, simulation, stacking};

/// Umbrella error for callers that drive the whole pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("data: {0}")]
    Data(#[from] data::DataError),
    #[error("loss: {0}")]
    Loss(#[from] loss::LossError),
    #[error("learners: {0}")]
    Learner(#[from] learners::LearnerError),
    #[error("stacking: {0}")]
    Stacking(#[from] stacking::StackingError),
    #[error("combiner: {0}")]
    Combiner(#[from] combiner::CombinerError),
    #[error("optimizer: {0}")]
    Optimizer(#[from] optimizer::OptimError),
    #[error("simulation: {0}")]
    Simulation(#[from] simulation::SimError),
    #[error("evaluation: {0}")]
    Evaluation(#[from] evaluation::EvalError),
}

pub type Result<T> = std::result::Result<T, Error>;
