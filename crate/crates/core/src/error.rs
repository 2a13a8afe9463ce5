use thiserror::Error;

/// Errors raised by the numerical modules and the command-line front end.
#[derive(Debug, Error)]
pub enum Error {
    #[error("parameter error: {0}")]
    Parameter(String),
    /// Two fields or a field and a grid disagree on layout.
    #[error("shape error: {0}")]
    Shape(String),
    #[error("geometry error: {0}")]
    Geometry(String),
    #[error("resolution error: {0}")]
    Resolution(String),
    #[error("resampling error: {0}")]
    Resampling(String),
    #[error("{what} did not converge after {iterations} iterations (last residual {last:.3e})")]
    Convergence {
        what: String,
        iterations: usize,
        last: f64,
        history: Vec<f64>,
    },
    #[error("extrapolation error: {0}")]
    Extrapolation(String),
    #[error("fit error: {0}")]
    Fit(String),
    #[error("domain error: {0}")]
    Domain(String),
    #[error("config error: {0}")]
    Config(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn convergence(what: impl Into<String>, history: Vec<f64>) -> Self {
        Error::Convergence {
            what: what.into(),
            iterations: history.len(),
            last: history.last().copied().unwrap_or(f64::NAN),
            history,
        }
    }
}
