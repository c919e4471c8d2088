use std::path::{Path, PathBuf};

/// Failure reading or writing one file.
#[derive(Debug, thiserror::Error)]
pub enum IoError {
    // Causes are part of the message and not chained, so `{:#}` shows them once.
    #[error("{}: {cause}", path.display())]
    Io { path: PathBuf, cause: std::io::Error },
    /// Malformed row; `line` is 1-based and counts comment lines.
    #[error("{}:{line}: {detail}", path.display())]
    Row { path: PathBuf, line: u64, detail: String },
    #[error("{}: {detail}", path.display())]
    Invalid { path: PathBuf, detail: String },
    #[error("{}: {cause}", path.display())]
    Core { path: PathBuf, cause: ccl_core::Error },
}

impl IoError {
    pub(crate) fn io(path: &Path, source: std::io::Error) -> Self {
        IoError::Io {
            path: path.to_path_buf(),
            cause: source,
        }
    }

    pub(crate) fn invalid(path: &Path, detail: impl Into<String>) -> Self {
        IoError::Invalid {
            path: path.to_path_buf(),
            detail: detail.into(),
        }
    }

    pub(crate) fn row(path: &Path, line: u64, detail: impl Into<String>) -> Self {
        IoError::Row {
            path: path.to_path_buf(),
            line,
            detail: detail.into(),
        }
    }

    pub(crate) fn core(path: &Path, source: ccl_core::Error) -> Self {
        IoError::Core {
            path: path.to_path_buf(),
            cause: source,
        }
    }
}

pub type Result<T, E = IoError> = std::result::Result<T, E>;

pub(crate) fn read(path: &Path) -> Result<Vec<u8>> {
    std::fs::read(path).map_err(|e| IoError::io(path, e))
}

pub(crate) fn read_string(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| IoError::io(path, e))
}

pub(crate) fn write(path: &Path, bytes: impl AsRef<[u8]>) -> Result<()> {
    std::fs::write(path, bytes).map_err(|e| IoError::io(path, e))
}
