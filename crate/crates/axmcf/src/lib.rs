//! Experiment driver around the axmcf-core solver: configuration, file
//! formats, plot script emission, and the command implementations behind
//! the binary.

pub mod commands;
pub mod config;
pub mod io;

/// Top-level failure classes, mapped onto process exit codes.
#[derive(Debug, thiserror::Error)]
pub enum AppError {
    /// Configuration rejected; carries every violation found.
    #[error("invalid configuration:\n{}", .0.join("\n"))]
    Validation(Vec<String>),
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("i/o failure: {0}")]
    Io(String),
}

impl AppError {
    pub fn exit_code(&self) -> i32 {
        match self {
            AppError::Validation(_) => 1,
            AppError::Numerical(_) => 2,
            AppError::Io(_) => 3,
        }
    }

    pub fn io(e: std::io::Error, path: &std::path::Path) -> Self {
        AppError::Io(format!("{}: {e}", path.display()))
    }
}
