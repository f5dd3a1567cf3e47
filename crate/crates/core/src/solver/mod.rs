//! Fixed-step integration of `M dX = f dt + g dW` with stiffly accurate,
//! diagonally implicit SRK schemes.

mod noise;
mod problem;
mod reference;
mod step;
mod trajectory;

use thiserror::Error;

use crate::tableau::TableauError;

pub use noise::{
    coarsen_increments, coarsen_path, draw_increments, draw_path, path_rng, NoiseIncrement,
};
pub use problem::{MatrixField, SdaeProblem, VectorField, DEFAULT_CONSISTENCY_TOLERANCE};
pub use reference::ExactReference;
pub use step::{
    finite_difference, srk_step, JacobianMode, NewtonConfig, SolverConfig, StageStats, Stepper,
};
pub use trajectory::{simulate_path, simulate_with_increments, StatsSummary, Trajectory};

pub(crate) use trajectory::format_float;

#[derive(Debug, Error)]
pub enum SolverError {
    #[error("step size must be positive and finite, got {h}")]
    NonpositiveStep { h: f64 },
    #[error("Wiener increment {i1} is not finite")]
    NonFiniteIncrement { i1: f64 },
    #[error("no increments to coarsen")]
    EmptyInput,
    #[error("increments of size {found} cannot be merged with size {expected}")]
    MismatchedSteps { expected: f64, found: f64 },
    #[error("{len} increments cannot be grouped in blocks of {factor}")]
    IncompatibleRefinement { len: usize, factor: usize },
    #[error("at least one step is required")]
    ZeroSteps,
    #[error("invalid problem: {0}")]
    InvalidProblem(String),
    #[error("invalid solver configuration: {0}")]
    InvalidConfig(String),
    #[error("tableau cannot be applied to a singular mass matrix: {0}")]
    NotApplicable(String),
    #[error("initial value violates the algebraic constraints (residual {residual:.3e})")]
    InconsistentInitialValue { residual: f64 },
    #[error("diffusion is nonzero ({value:.3e}) in algebraic row {row}")]
    NoiseInConstraint { row: usize, value: f64 },
    #[error("Newton iteration for stage {stage} stopped after {iterations} iterations with residual {residual:.3e}")]
    NewtonDiverged {
        stage: usize,
        residual: f64,
        iterations: usize,
    },
    #[error("iteration matrix of stage {stage} is numerically singular")]
    SingularIteration { stage: usize },
    #[error("stage {stage} produced a non-finite value")]
    NonFiniteStage { stage: usize },
    #[error("step {step}: {source}")]
    AtStep {
        step: usize,
        #[source]
        source: Box<SolverError>,
    },
    #[error(transparent)]
    Tableau(#[from] TableauError),
    #[error("csv output failed: {0}")]
    Csv(#[from] csv::Error),
    #[error("json output failed: {0}")]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl SolverError {
    /// The underlying error with step context removed.
    pub fn root(&self) -> &SolverError {
        match self {
            SolverError::AtStep { source, .. } => source.root(),
            other => other,
        }
    }

    /// Input or configuration problems, as opposed to numerical failures.
    pub fn is_validation(&self) -> bool {
        matches!(
            self.root(),
            SolverError::NonpositiveStep { .. }
                | SolverError::NonFiniteIncrement { .. }
                | SolverError::EmptyInput
                | SolverError::MismatchedSteps { .. }
                | SolverError::IncompatibleRefinement { .. }
                | SolverError::ZeroSteps
                | SolverError::InvalidProblem(_)
                | SolverError::InvalidConfig(_)
                | SolverError::NotApplicable(_)
                | SolverError::InconsistentInitialValue { .. }
                | SolverError::Tableau(_)
        )
    }
}
