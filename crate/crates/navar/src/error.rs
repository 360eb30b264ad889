//! Crate-wide error type and result alias.

use thiserror::Error;

/// Everything that can go wrong across simulation, estimation, and I/O.
#[derive(Debug, Error)]
pub enum Error {
    /// A parameter or input failed validation before any work started.
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// The process specification is not contractive, so no stationary
    /// distribution exists and simulation refuses to run.
    #[error("nonstationary specification: stability margin {margin:.6} >= 1")]
    Nonstationary { margin: f64 },

    /// The simulated state left the representable range.
    #[error("non-finite value encountered during simulation at time index {time_index}")]
    NonFinite { time_index: usize },

    /// A custom component function was supplied without a Lipschitz constant.
    /// `row`/`col` are the transition-matrix coordinates (target, source).
    #[error("unbounded component: entry ({row}, {col}) declares no Lipschitz constant")]
    UnboundedComponent { row: usize, col: usize },

    /// A per-covariate Gram matrix was singular and the ridge floor was disabled.
    #[error("degenerate Gram matrix for covariate {covariate}")]
    DegenerateGram { covariate: usize },

    /// A classification metric was requested on truth labels with no
    /// positives or no negatives.
    #[error("undefined metric: {0}")]
    UndefinedMetric(String),

    /// Adaptive quadrature failed to converge to the requested tolerance.
    #[error("quadrature did not converge: {0}")]
    QuadratureFailure(String),

    /// Not enough observations for the requested operation.
    #[error("insufficient data: {0}")]
    InsufficientData(String),

    /// No (c1, c2) pair on the search grid dominates the empirical tails.
    #[error("no feasible envelope on the constant grid: {0}")]
    NoFeasibleEnvelope(String),

    /// Malformed CSV input; row and column are 1-based file coordinates.
    #[error("csv parse error at row {row}, column {column}: {message}")]
    CsvParse {
        row: usize,
        column: usize,
        message: String,
    },

    /// Malformed or unknown key in a key-value config file.
    #[error("config error at line {line}: {message}")]
    Config { line: usize, message: String },

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Process exit code for the CLI: 2 = input validation, 3 = model or
    /// precondition failure, 4 = internal.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::InvalidInput(_)
            | Error::CsvParse { .. }
            | Error::Config { .. } => 2,
            Error::Nonstationary { .. }
            | Error::NonFinite { .. }
            | Error::UnboundedComponent { .. }
            | Error::DegenerateGram { .. }
            | Error::UndefinedMetric(_)
            | Error::InsufficientData(_)
            | Error::NoFeasibleEnvelope(_) => 3,
            Error::QuadratureFailure(_) | Error::Io(_) | Error::Json(_) => 4,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
