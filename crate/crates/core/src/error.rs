use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid model: {0}")]
    InvalidModel(String),
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("insufficient excitation: reciprocal condition {rcond:.3e} below {threshold:.1e}")]
    Excitation { rcond: f64, threshold: f64 },
    #[error("numerical degeneracy at step {step}: {detail}")]
    Degenerate { step: u64, detail: String },
    #[error("solver did not converge after {iterations} iterations (residual {residual:.3e})")]
    NoConvergence { iterations: usize, residual: f64 },
    #[error("singular matrix: {0}")]
    Singular(String),
    #[error("unstable: {0}")]
    Unstable(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("parse error at row {row}: {detail}")]
    Parse { row: u64, detail: String },
    #[error("config error: {0}")]
    Config(String),
    #[error("io error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(err: std::io::Error) -> Self {
        Error::Io(err.to_string())
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
