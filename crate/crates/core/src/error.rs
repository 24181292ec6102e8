use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("family mismatch: expected {expected}, found {found}")]
    FamilyMismatch { expected: String, found: String },

    #[error("resolution error: {0}")]
    Resolution(String),

    #[error("window of {requested} elements exceeds the limit of {limit}")]
    Resource { requested: u128, limit: usize },

    #[error("precondition failed: {0}")]
    Precondition(String),

    #[error("point lies {distance} from the nearest net point, beyond eps = {eps}")]
    OutOfNet { distance: f64, eps: f64 },

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("no convergence after {iterations} iterations (residual {residual:e})")]
    NonConvergence {
        iterations: usize,
        residual: f64,
        residual_history: Vec<f64>,
    },

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn mismatch(expected: impl Into<String>, found: impl Into<String>) -> Self {
        Error::FamilyMismatch {
            expected: expected.into(),
            found: found.into(),
        }
    }
}
