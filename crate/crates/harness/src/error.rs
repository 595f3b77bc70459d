use std::io;
use std::path::PathBuf;

use thiserror::Error;

/// Checkpoint load/save failures. Each kind has its own process exit code.
#[derive(Debug, Error)]
pub enum CheckpointError {
    #[error("not a checkpoint file (bad magic)")]
    BadMagic,
    #[error("unsupported checkpoint format version {0}")]
    Version(u32),
    #[error("checkpoint was written for another network (hash {found:#018x}, expected {expected:#018x})")]
    HashMismatch { expected: u64, found: u64 },
    #[error("checkpoint truncated: need {needed} bytes, file has {actual}")]
    Truncated { needed: u64, actual: u64 },
    #[error("checkpoint holds {found} parameters, network needs {expected}")]
    CountMismatch { expected: u64, found: u64 },
    #[error("checkpoint has {0} unexpected trailing bytes")]
    TrailingBytes(u64),
    #[error("checkpoint i/o on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
}

impl CheckpointError {
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::BadMagic => 10,
            Self::Version(_) => 11,
            Self::HashMismatch { .. } => 12,
            Self::Truncated { .. } => 13,
            Self::CountMismatch { .. } => 14,
            Self::TrailingBytes(_) => 15,
            Self::Io { .. } => 16,
        }
    }
}

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("runtime fault: {0}")]
    Runtime(String),
    #[error(transparent)]
    Checkpoint(#[from] CheckpointError),
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
}

impl HarnessError {
    pub const EXIT_CONFIG: i32 = 2;
    pub const EXIT_RUNTIME: i32 = 3;

    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Config(_) => Self::EXIT_CONFIG,
            Self::Runtime(_) | Self::Io { .. } => Self::EXIT_RUNTIME,
            Self::Checkpoint(e) => e.exit_code(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: io::Error) -> Self {
        Self::Io {
            path: path.into(),
            source,
        }
    }
}

impl From<asyncrl_core::Error> for HarnessError {
    fn from(e: asyncrl_core::Error) -> Self {
        match e {
            asyncrl_core::Error::Config(m) | asyncrl_core::Error::Unsupported(m) => Self::Config(m),
            other => Self::Runtime(other.to_string()),
        }
    }
}

pub type Result<T> = std::result::Result<T, HarnessError>;
