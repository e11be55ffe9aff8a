use std::path::{Path, PathBuf};

/// Failures of the command-line layer. Each maps to a process exit code.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("invalid config key `{key}`: {message}")]
    Config { key: String, message: String },
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{}: line {line}: {message}", path.display())]
    Parse { path: PathBuf, line: usize, message: String },
    #[error("solution does not match the configured grid: {0}")]
    GridMismatch(String),
    #[error("solver did not converge after {iterations} iterations (residual {residual:e})")]
    NonConvergence { iterations: usize, residual: f64 },
    #[error("verification failed: {0}")]
    Verification(String),
    #[error(transparent)]
    Core(#[from] slpants_core::Error),
}

/// Process exit codes.
pub mod exit {
    pub const OK: i32 = 0;
    pub const CONFIG: i32 = 1;
    pub const NON_CONVERGENCE: i32 = 2;
    pub const VERIFICATION: i32 = 3;
}

impl CliError {
    pub fn io(path: &Path, source: std::io::Error) -> Self {
        CliError::Io { path: path.to_path_buf(), source }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::NonConvergence { .. } => exit::NON_CONVERGENCE,
            CliError::Core(slpants_core::Error::NonConvergence(_) | slpants_core::Error::SingularJacobian { .. }) => {
                exit::NON_CONVERGENCE
            }
            CliError::Verification(_) => exit::VERIFICATION,
            _ => exit::CONFIG,
        }
    }
}
