use std::path::PathBuf;

use num_complex::Complex64;
use thiserror::Error;

/// Which side of the two-sided recurrence an event refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Right,
    Left,
}

impl std::fmt::Display for Side {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Side::Right => f.write_str("right"),
            Side::Left => f.write_str("left"),
        }
    }
}

#[derive(Debug, Error)]
pub enum MorError {
    #[error("shifted matrix is numerically singular at shift {shift}")]
    SingularShift { shift: Complex64 },

    #[error("quadratic pencil is numerically singular at {omega}")]
    SingularPencil { omega: Complex64 },

    #[error("mass matrix is numerically singular")]
    SingularMass,

    #[error("Lanczos breakdown at iteration {iteration}: smallest singular value {min_singular:e} of the block inner product (relative {relative:e})")]
    Breakdown {
        iteration: usize,
        min_singular: f64,
        relative: f64,
    },

    #[error("deflation at iteration {iteration}: {side} block has numerical rank {rank} < {width}")]
    Deflation {
        iteration: usize,
        side: Side,
        rank: usize,
        width: usize,
    },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("residual matrix is numerically zero; the reduction has converged")]
    DegenerateResidual,

    #[error("shift search region is empty")]
    EmptyRegion,

    #[error("second-order structure lost: coupling block condition estimate {condition:e}")]
    StructureLoss { condition: f64 },

    #[error("the infinite shift has no finite Hessenberg representation")]
    InfiniteShift,

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("unsupported Matrix Market content: {0}")]
    Unsupported(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
}

impl MorError {
    /// Attach the driver iteration to errors raised inside the recurrence.
    pub fn at_iteration(self, iteration: usize) -> Self {
        match self {
            MorError::Breakdown {
                min_singular,
                relative,
                ..
            } => MorError::Breakdown {
                iteration,
                min_singular,
                relative,
            },
            MorError::Deflation {
                side, rank, width, ..
            } => MorError::Deflation {
                iteration,
                side,
                rank,
                width,
            },
            other => other,
        }
    }

    /// True for failures of the numerics (as opposed to usage or IO problems).
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            MorError::SingularShift { .. }
                | MorError::SingularPencil { .. }
                | MorError::SingularMass
                | MorError::Breakdown { .. }
                | MorError::Deflation { .. }
                | MorError::DegenerateResidual
                | MorError::EmptyRegion
                | MorError::StructureLoss { .. }
                | MorError::InfiniteShift
        )
    }
}

pub type Result<T, E = MorError> = std::result::Result<T, E>;
