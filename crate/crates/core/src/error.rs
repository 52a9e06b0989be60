use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid model: {}", .0.join("; "))]
    InvalidModel(Vec<String>),

    #[error("model file {path}, line {line}: {message}")]
    Parse { path: String, line: usize, message: String },

    #[error("i/o error: {0}")]
    Io(String),

    #[error("unsupported model: {0}")]
    Unsupported(String),

    #[error("grid too coarse: spacing {spacing:.3e} exceeds 1/(4k) = {limit:.3e} for k = {k}")]
    GridTooCoarse { spacing: f64, limit: f64, k: u32 },

    #[error("operator assembly failed: {0}")]
    Assembly(String),

    #[error("singular system: pivot {pivot:.3e} at row {row}")]
    Singular { row: usize, pivot: f64 },

    #[error("quadrature did not converge: estimated error {error:.3e} > tolerance {tolerance:.3e}")]
    Quadrature { error: f64, tolerance: f64 },

    #[error("iteration did not converge after {iterations} iterations (last change {change:.3e})")]
    NoConvergence { iterations: usize, change: f64 },

    #[error("instability: {0}")]
    Instability(String),

    #[error("degenerate fit: {0}")]
    DegenerateFit(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Io(e.to_string())
    }
}
