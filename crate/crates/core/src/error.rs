use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// The Gram matrix could not be factorized even with jitter on the diagonal.
    /// `duplicates` lists index pairs of measurements sharing a location.
    #[error("gram matrix is numerically singular ({detail}); duplicate locations: {duplicates:?}")]
    Conditioning {
        detail: String,
        duplicates: Vec<(usize, usize)>,
    },

    #[error("location ({x}, {y}) lies outside the environment region [0, {extent}]^2")]
    OutOfRegion { x: f64, y: f64, extent: f64 },

    #[error("weight configuration error: {0}")]
    WeightConfig(String),

    #[error("infeasible instance: {0}")]
    Infeasible(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("parse error in {path}: {detail}")]
    Parse { path: PathBuf, detail: String },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("csv error on {path}: {source}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },
}

impl Error {
    pub(crate) fn arg(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
