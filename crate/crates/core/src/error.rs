use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// Physical parameters outside the model's domain (e.g. `|nu| >= omega`).
    #[error("physics domain: {0}")]
    Domain(String),

    /// Malformed arguments to an operation (index out of range, bad grid, ...).
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// The (N0, N1) truncation needed to reach the requested captured weight
    /// exceeds the hard cap.
    #[error("truncation cap exceeded: needed Nmax > {cap} for epsilon = {epsilon:e}")]
    TruncationCap { cap: usize, epsilon: f64 },

    /// The exact oracle refuses Hilbert spaces larger than its cap.
    #[error("oracle dimension {dimension} exceeds cap {cap}")]
    OracleCap { dimension: usize, cap: usize },

    /// A matrix handed to the entanglement routines is not a density matrix
    /// within tolerance.
    #[error("malformed density matrix: {0}")]
    MalformedDensity(String),

    #[error("configuration: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
