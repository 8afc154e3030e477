use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// An argument lies outside the physical domain of a model function.
    #[error("domain error: {0}")]
    Domain(String),

    /// A documented precondition of an operation does not hold for the input.
    #[error("precondition violated: {0}")]
    Precondition(String),

    /// Inconsistent use of the API or CLI (mismatched grids, bad flags).
    #[error("usage error: {0}")]
    Usage(String),

    /// Configuration file could not be parsed or failed validation.
    #[error("config error: {0}")]
    Config(String),

    /// Malformed input file.
    #[error("format error: {0}")]
    Format(String),

    /// Quadrature did not converge, a calibration curve is not monotone, or similar.
    #[error("numerical error: {0}")]
    Numerical(String),

    #[error("gating error: {0}")]
    Gating(String),

    /// A value lies outside the admissible interval of a lookup.
    #[error("{value} is outside the admissible interval [{min}, {max}]")]
    Range { value: f64, min: f64, max: f64 },

    #[error("search error: {0}")]
    Search(String),

    #[error("I/O error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    /// Process exit code used by the command-line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Domain(_) | Error::Precondition(_) | Error::Usage(_) | Error::Config(_) | Error::Range { .. } => 2,
            Error::Format(_) | Error::Io { .. } => 3,
            Error::Numerical(_) | Error::Gating(_) | Error::Search(_) => 4,
        }
    }

    pub(crate) fn io(path: impl AsRef<std::path::Path>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.as_ref().display().to_string(),
            source,
        }
    }
}
