use std::path::{Path, PathBuf};

use hpp_core::Error as CoreError;

/// Failures grouped by the exit status they map to.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("data error: {0}")]
    Data(String),
    #[error("numerical error: {0}")]
    Numeric(String),
    #[error("cannot {action} {path}: {source}")]
    Io {
        action: &'static str,
        path: PathBuf,
        source: std::io::Error,
    },
}

pub type CliResult<T> = std::result::Result<T, CliError>;

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Data(_) | CliError::Io { .. } => 3,
            CliError::Numeric(_) => 4,
        }
    }

    pub fn io(action: &'static str, path: &Path, source: std::io::Error) -> Self {
        CliError::Io {
            action,
            path: path.to_path_buf(),
            source,
        }
    }

    /// Classify a library error raised while building the model from
    /// configuration values.
    pub fn from_config(err: CoreError) -> Self {
        match err {
            CoreError::DataSupport { .. } | CoreError::InfeasibleVariance { .. } => Self::from(err),
            CoreError::InvalidArgument(_)
            | CoreError::MeanDomain { .. }
            | CoreError::InvalidCanonical { .. }
            | CoreError::Dimension { .. }
            | CoreError::UnsupportedDesign(_) => CliError::Config(err.to_string()),
            _ => Self::from(err),
        }
    }
}

impl From<CoreError> for CliError {
    fn from(err: CoreError) -> Self {
        match err {
            CoreError::DataSupport { .. }
            | CoreError::Dimension { .. }
            | CoreError::InfeasibleVariance { .. } => CliError::Data(err.to_string()),
            CoreError::InvalidArgument(_)
            | CoreError::UnsupportedDesign(_)
            | CoreError::InsufficientDraws { .. } => CliError::Config(err.to_string()),
            CoreError::Separation => CliError::Numeric(format!(
                "{err}; the maximum likelihood estimate does not exist, use a proper prior"
            )),
            _ => CliError::Numeric(err.to_string()),
        }
    }
}
