use std::io;
use std::path::PathBuf;

use qfl_core::ErrorKind;

/// Malformed IDX input. `offset` is the byte position in the decompressed
/// stream.
#[derive(Debug, thiserror::Error)]
#[error("{}: byte {offset}: {message}", path.display())]
pub struct FormatError {
    pub path: PathBuf,
    pub offset: u64,
    pub message: String,
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("configuration: {0}")]
    Config(String),
    #[error("data: {0}")]
    Data(String),
    #[error(transparent)]
    Format(#[from] FormatError),
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error(transparent)]
    Core(#[from] qfl_core::Error),
}

pub type Result<T, E = CliError> = std::result::Result<T, E>;

impl CliError {
    pub fn io(path: impl Into<PathBuf>, source: io::Error) -> Self {
        CliError::Io {
            path: path.into(),
            source,
        }
    }

    /// 2 configuration, 3 data, 4 numeric.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Data(_) | CliError::Format(_) | CliError::Io { .. } => 3,
            CliError::Core(e) => match e.kind() {
                ErrorKind::Config => 2,
                ErrorKind::Data => 3,
                ErrorKind::Numeric => 4,
            },
        }
    }
}
