use std::io;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, GhostError>;

#[derive(Debug, Error)]
pub enum GhostError {
    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error(
        "sampling guard violated: quadratic phase step {phase_step:.4} rad exceeds pi \
         (pitch {pitch:.4e} m, max separation {max_separation:.4e} m, lambda*z {lambda_z:.4e} m^2); \
         max admissible grid half-width {max_half_width:.4e} m"
    )]
    Sampling {
        phase_step: f64,
        pitch: f64,
        max_separation: f64,
        lambda_z: f64,
        max_half_width: f64,
    },

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("numerical check failed: {0}")]
    Numerical(String),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("degenerate distribution: {0}")]
    Degenerate(String),

    #[error("config parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },

    #[error("invalid config field `{field}`: {message}")]
    Config { field: String, message: String },

    #[error("format error: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] io::Error),
}

impl GhostError {
    pub(crate) fn config(field: &str, message: impl Into<String>) -> Self {
        GhostError::Config {
            field: field.to_string(),
            message: message.into(),
        }
    }

    /// Process exit code used by the command-line frontend.
    pub fn exit_code(&self) -> i32 {
        match self {
            GhostError::Parse { .. } | GhostError::Config { .. } | GhostError::Format(_) => 2,
            GhostError::Parameter(_)
            | GhostError::Sampling { .. }
            | GhostError::Dimension(_)
            | GhostError::Degenerate(_)
            | GhostError::Numerical(_) => 3,
            GhostError::InsufficientData(_) => 4,
            GhostError::Io(_) => 1,
        }
    }
}
