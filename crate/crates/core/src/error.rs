use std::path::PathBuf;

use thiserror::Error;

use crate::glm::{GlmPath, GlmPathPoint};

pub type Result<T, E = FlashError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum FlashError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("cannot write {path}: {source}")]
    Write {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed csv: {0}")]
    Csv(String),

    #[error("response column `{0}` not found in header")]
    MissingColumn(String),

    #[error("non-numeric cell {value:?} at row {row}, column `{column}`")]
    Parse {
        row: usize,
        column: String,
        value: String,
    },

    #[error("predictor `{0}` has zero variance")]
    ZeroVariance(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("gram matrix of the active set is singular when adding column {index}")]
    SingularGram { index: usize },

    #[error("step budget of {0} partial moves exceeded")]
    StepBudget(usize),

    #[error("corrector did not converge after {iterations} iterations (kkt residual {kkt_residual:.3e})")]
    Corrector {
        iterations: usize,
        kkt_residual: f64,
        last: Box<GlmPathPoint>,
    },

    #[error("glm path stopped after {} points: {source}", prefix.points.len())]
    GlmPath {
        prefix: Box<GlmPath>,
        #[source]
        source: Box<FlashError>,
    },

    #[error("{0}")]
    Simulation(String),
}

impl FlashError {
    /// Process exit code: 1 for I/O, 2 for invalid input, 3 for numerical failure.
    pub fn exit_code(&self) -> i32 {
        match self {
            FlashError::Io { .. } | FlashError::Write { .. } => 1,
            FlashError::Csv(_)
            | FlashError::MissingColumn(_)
            | FlashError::Parse { .. }
            | FlashError::ZeroVariance(_)
            | FlashError::Shape(_)
            | FlashError::InvalidArgument(_) => 2,
            FlashError::SingularGram { .. }
            | FlashError::StepBudget(_)
            | FlashError::Corrector { .. }
            | FlashError::GlmPath { .. }
            | FlashError::Simulation(_) => 3,
        }
    }
}
