use thiserror::Error;

/// Errors raised across the toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    Dimension { expected: usize, found: usize },

    #[error("contract violated: {0}")]
    Contract(String),

    #[error("{n_qubits} qubits exceeds the configured cap of {cap}")]
    Resource { n_qubits: usize, cap: usize },

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("objective returned a non-finite value at iteration {iteration}")]
    NonFinite {
        iteration: usize,
        trace: Vec<crate::opt::TraceEntry>,
    },

    #[error("gradient check failed: max deviation {deviation:.3e} from finite differences")]
    GradientCheck { deviation: f64 },

    #[error("ill-conditioned reference: metric eigenvalue {min_eigenvalue:.3e} (condition {condition:.3e})")]
    IllConditionedReference { min_eigenvalue: f64, condition: f64 },

    #[error("readout correction unreliable: calibration condition number {condition:.3e}")]
    CorrectionUnreliable { condition: f64 },

    #[error("spin classification failed for state {index}: <S^2> = {s_squared:.6}")]
    Classification { index: usize, s_squared: f64 },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("record schema: {0}")]
    Schema(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn contract(msg: impl Into<String>) -> Error {
    Error::Contract(msg.into())
}
