use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}:{line}: {msg}")]
    Parse {
        path: PathBuf,
        line: usize,
        msg: String,
    },
    #[error("invalid json in {path}: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("catalog: {0}")]
    Catalog(String),
    #[error("mesh has no usable geometry")]
    EmptyMesh,
    #[error("empty point set")]
    EmptySet,
    #[error("degenerate geometry: {0}")]
    Degenerate(String),
    #[error("mesh is not watertight: {0}")]
    NotWatertight(String),
    #[error("contract violation: {0}")]
    Contract(String),
    #[error("non-finite loss at iteration {iteration}")]
    NonFinite { iteration: usize },
    #[error("simulation unstable at step {step}: kinetic energy {energy:.3e} exceeds bound {bound:.3e}")]
    Unstable { step: usize, energy: f64, bound: f64 },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn json(path: impl Into<PathBuf>, source: serde_json::Error) -> Self {
        Error::Json {
            path: path.into(),
            source,
        }
    }

    /// Process exit code: 1 for IO and configuration problems, 2 for
    /// geometric contract violations.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Io { .. }
            | Error::Parse { .. }
            | Error::Json { .. }
            | Error::Config(_)
            | Error::Catalog(_) => 1,
            Error::EmptyMesh
            | Error::EmptySet
            | Error::Degenerate(_)
            | Error::NotWatertight(_)
            | Error::Contract(_)
            | Error::NonFinite { .. }
            | Error::Unstable { .. } => 2,
        }
    }
}
