use thiserror::Error;

/// Errors raised by the numerics, the harness and the command line front end.
#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("CFL violation: requested dt = {requested:e} exceeds stable bound {bound:e}")]
    Cfl { requested: f64, bound: f64 },

    #[error("quadrature failure: {0}")]
    Quadrature(String),

    #[error("optimizer could not bracket a minimum: {0}")]
    Bracket(String),

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("schema mismatch: file declares `{found}`, this build reads `{expected}`")]
    Schema { found: String, expected: String },

    #[error("solver instability: {0}")]
    Instability(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn domain<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Domain(msg.into()))
}
