use std::fmt;
use std::path::{Path, PathBuf};

/// Everything a command can fail with, mapped onto the process exit code.
#[derive(Debug)]
pub enum CliError {
    Core(approxbundle::Error),
    Io { path: PathBuf, source: std::io::Error },
    Usage(String),
    /// The cocycle violates `ε` already at the first filtration value, so
    /// there is no scale to compute the class at.
    EmptySpan(String),
}

impl CliError {
    pub fn io(path: &Path, source: std::io::Error) -> Self {
        CliError::Io { path: path.to_path_buf(), source }
    }

    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Core(approxbundle::Error::Regime(_)) => 2,
            CliError::Core(approxbundle::Error::Parse { .. }) | CliError::Io { .. } => 4,
            CliError::Core(_) => 3,
            CliError::EmptySpan(_) => 5,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Core(e) => write!(f, "{e}"),
            CliError::Io { path, source } => write!(f, "{}: {source}", path.display()),
            CliError::Usage(m) => write!(f, "{m}"),
            CliError::EmptySpan(m) => write!(f, "empty epsilon-span: {m}"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<approxbundle::Error> for CliError {
    fn from(e: approxbundle::Error) -> Self {
        CliError::Core(e)
    }
}

pub type CliResult<T> = Result<T, CliError>;
