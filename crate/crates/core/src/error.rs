use std::path::PathBuf;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("interval [{a}, {b}] is not contained in window [{lo}, {hi}]")]
    Bounds { a: i64, b: i64, lo: i64, hi: i64 },

    #[error("energy {energy} is resonant for box [{a}, {b}]")]
    SingularEnergy { a: i64, b: i64, energy: f64 },

    #[error("contract violation: {0}")]
    Contract(String),

    #[error("insufficient signal: {0}")]
    InsufficientSignal(String),

    #[error("energy {energy} lies outside the curve range [{lo}, {hi}]")]
    Range { energy: f64, lo: f64, hi: f64 },

    #[error("fit failed: {0}")]
    Fit(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn param(msg: impl Into<String>) -> Self {
        Error::Parameter(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
