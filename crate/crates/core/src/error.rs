use std::path::PathBuf;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// An argument outside the domain of an operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// Invalid configuration, with the offending field path.
    #[error("config error at `{path}`: {message}")]
    Config { path: String, message: String },

    #[error("unreachable linkage configuration at drive angle {angle_deg:.4} deg")]
    Unreachable { angle_deg: f64 },

    #[error("magnetic coupling slip: required torque {required:.4} N·m exceeds {limit:.4} N·m")]
    Slip { required: f64, limit: f64 },

    #[error("simulation fault at t = {time:.6} s: {message}")]
    SimulationFault { time: f64, message: String },

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("rank deficient: {0}")]
    Rank(String),

    #[error("undefined cost of transport: mean speed {mean_speed} m/s is not positive")]
    UndefinedCot { mean_speed: f64 },

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("validation error: {0}")]
    Validation(String),

    #[error("experiment condition {condition} failed: {source}")]
    Condition {
        condition: String,
        #[source]
        source: Box<Error>,
    },

    #[error("I/O error on {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn config(path: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            path: path.into(),
            message: message.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for errors caused by the filesystem rather than by bad inputs.
    pub fn is_io(&self) -> bool {
        match self {
            Error::Io { .. } => true,
            Error::Condition { source, .. } => source.is_io(),
            _ => false,
        }
    }
}
