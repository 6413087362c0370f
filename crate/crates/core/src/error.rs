use thiserror::Error;

/// Errors surfaced by the library. The `module` prefix of each message says
/// where the failure originated.
#[derive(Debug, Error)]
pub enum Error {
    #[error("clifford: {0}")]
    Clifford(String),
    #[error("lattice: {0}")]
    Lattice(String),
    #[error("monopole: {0}")]
    Monopole(String),
    #[error("models: {0}")]
    Model(String),
    #[error("flow: endpoint not invertible at alpha={alpha}: eigenvalue {value} within {tol} of the crossing line")]
    EndpointNotInvertible { alpha: f64, value: f64, tol: f64 },
    #[error("flow: track matching failed on [{a}, {b}]: {reason}")]
    TrackMatching { a: f64, b: f64, reason: String },
    #[error("flow: {0}")]
    Flow(String),
    #[error("index: {0}")]
    Index(String),
    #[error("oracle: spectrum is gapless or unresolved on the momentum grid ({0})")]
    Gapless(String),
    #[error("linalg: {0}")]
    Linalg(String),
    #[error("config: {0}")]
    Config(String),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl From<ndarray_linalg::error::LinalgError> for Error {
    fn from(e: ndarray_linalg::error::LinalgError) -> Self {
        Error::Linalg(e.to_string())
    }
}
