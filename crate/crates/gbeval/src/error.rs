use std::io;
use std::path::{Path, PathBuf};

/// Failures grouped by the exit code they map to.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// Missing, unreadable or unpaired inputs.
    #[error("{0}")]
    Input(String),
    /// Inputs that exist but hold unusable data.
    #[error("{0}")]
    Data(String),
    /// Bad flags or configuration files.
    #[error("{0}")]
    Config(String),
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: io::Error },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub const EXIT_OK: i32 = 0;
pub const EXIT_INPUT: i32 = 2;
pub const EXIT_DATA: i32 = 3;
pub const EXIT_CONFIG: i32 = 4;

impl Error {
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Input(_) | Error::Io { .. } => EXIT_INPUT,
            Error::Data(_) => EXIT_DATA,
            Error::Config(_) => EXIT_CONFIG,
        }
    }

    pub fn io(path: impl AsRef<Path>) -> impl FnOnce(io::Error) -> Error {
        let path = path.as_ref().to_path_buf();
        move |source| Error::Io { path, source }
    }

    /// Wraps a core error, prefixing `context` (usually a file or pair name).
    pub fn core(context: impl std::fmt::Display) -> impl FnOnce(gbeval_core::Error) -> Error {
        move |e| {
            use gbeval_core::Error as E;
            let msg = format!("{context}: {e}");
            match e {
                E::InvalidParameter(_) | E::SeedPlacement { .. } => Error::Config(msg),
                E::Manifest(_) | E::Empty(_) => Error::Input(msg),
                _ => Error::Data(msg),
            }
        }
    }
}
