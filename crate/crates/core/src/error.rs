//! Error type shared across the toolkit.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("csv error in {path}: {source}")]
    Csv {
        path: String,
        #[source]
        source: csv::Error,
    },

    #[error("{path}: file has no data rows")]
    EmptyFile { path: String },

    #[error("{path}: label column '{column}' not found (header: {header})")]
    MissingLabelColumn {
        path: String,
        column: String,
        header: String,
    },

    #[error("{path}: row {row}, column '{column}': expected a number, found '{value}'")]
    NonNumericCell {
        path: String,
        row: usize,
        column: String,
        value: String,
    },

    #[error("{path}: row {row}: label must be exactly \"0\" or \"1\", found '{value}'")]
    BadLabel {
        path: String,
        row: usize,
        value: String,
    },

    #[error("dimension mismatch: expected {expected}, found {found} ({context})")]
    DimensionMismatch {
        expected: usize,
        found: usize,
        context: String,
    },

    #[error("invalid parameter: {0}")]
    InvalidParam(String),

    #[error("class too small: {0}")]
    ClassTooSmall(String),

    #[error("requested {requested} rows but class '{class}' has only {available}")]
    SampleTooLarge {
        class: String,
        requested: usize,
        available: usize,
    },

    #[error("dual problem infeasible: N*C = {nc} < 1")]
    Infeasible { nc: f64 },

    #[error("kernel matrix is not symmetric (max asymmetry {max_dev:e})")]
    NonSymmetricKernel { max_dev: f64 },

    #[error("dual solver did not converge within {updates} pair updates (KKT residual {residual:e})")]
    NoConvergence { updates: usize, residual: f64 },

    #[error("degenerate kernel: all centered eigenvalues below {floor:e}")]
    DegenerateKernel { floor: f64 },

    #[error("eigendecomposition failed: {0}")]
    EigenFailure(String),

    #[error("non-finite value encountered: {0}")]
    NonFinite(String),

    #[error("model spec parse error: {0}")]
    SpecParse(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("model file error: {0}")]
    ModelFile(String),

    #[error("benchmark error: {0}")]
    Benchmark(String),
}

impl Error {
    /// Process exit code contract: 0 success, 1 usage, 2 data, 3 numerical.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::SpecParse(_) | Error::Config(_) | Error::InvalidParam(_) => 1,
            Error::Io { .. }
            | Error::Csv { .. }
            | Error::EmptyFile { .. }
            | Error::MissingLabelColumn { .. }
            | Error::NonNumericCell { .. }
            | Error::BadLabel { .. }
            | Error::DimensionMismatch { .. }
            | Error::ClassTooSmall(_)
            | Error::SampleTooLarge { .. }
            | Error::ModelFile(_) => 2,
            Error::Infeasible { .. }
            | Error::NonSymmetricKernel { .. }
            | Error::NoConvergence { .. }
            | Error::DegenerateKernel { .. }
            | Error::EigenFailure(_)
            | Error::NonFinite(_)
            | Error::Benchmark(_) => 3,
        }
    }
}
