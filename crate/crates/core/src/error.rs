use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("angle {theta} rad outside [-{theta_max}, {theta_max}]")]
    AngleOutOfRange { theta: f64, theta_max: f64 },

    #[error("invalid scattering profile: {0}")]
    InvalidProfile(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("no user has a non-empty support; nothing to probe")]
    NothingToProbe,

    #[error("infeasible sparsification: {0}")]
    Infeasible(String),

    #[error("support of size {omega} exceeds pilot dimension {pilots}")]
    SupportExceedsPilots { omega: usize, pilots: usize },

    #[error("pilot dimension {pilots} exceeds resource block size {block}")]
    PilotsExceedBlock { pilots: usize, block: usize },

    #[error("malformed instance at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {source}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },

    #[error("config: {0}")]
    Toml(#[from] toml::de::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
