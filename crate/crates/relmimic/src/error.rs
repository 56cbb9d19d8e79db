use std::path::{Path, PathBuf};

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("configuration: {0}")]
    Config(String),
    #[error("{path}: {msg}")]
    Format { path: PathBuf, msg: String },
    #[error("resolution mismatch: expected {expected}, found {found}")]
    Resolution { expected: usize, found: usize },
    /// A numerical failure inside one of the trained networks.
    #[error("{module}: {source}")]
    Module {
        module: &'static str,
        source: relmimic_core::Error,
    },
    #[error(transparent)]
    Core(#[from] relmimic_core::Error),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

impl Error {
    pub fn io(path: &Path, source: std::io::Error) -> Error {
        Error::Io {
            path: path.to_path_buf(),
            source,
        }
    }

    pub fn format(path: &Path, msg: impl Into<String>) -> Error {
        Error::Format {
            path: path.to_path_buf(),
            msg: msg.into(),
        }
    }
}

/// Attach the name of the network whose step failed.
pub(crate) trait InModule<T> {
    fn in_module(self, module: &'static str) -> Result<T>;
}

impl<T> InModule<T> for relmimic_core::Result<T> {
    fn in_module(self, module: &'static str) -> Result<T> {
        self.map_err(|source| Error::Module { module, source })
    }
}
