use std::path::PathBuf;

use thiserror::Error;

/// Everything that ends a run with the input-error exit code.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },

    /// Malformed document; the message carries line and column.
    #[error("{origin}: {message}")]
    Parse { origin: String, message: String },

    #[error("{origin}: field `{field}`: {message}")]
    Field {
        origin: String,
        field: String,
        message: String,
    },

    #[error("{0}")]
    Usage(String),

    #[error("{context}: {source}")]
    Core {
        context: String,
        source: epi_core::Error,
    },

    #[error("serializing report: {0}")]
    Serialize(#[from] serde_json::Error),

    #[error("thread pool: {0}")]
    ThreadPool(#[from] rayon::ThreadPoolBuildError),
}

impl CliError {
    pub(crate) fn core(context: impl Into<String>) -> impl FnOnce(epi_core::Error) -> Self {
        let context = context.into();
        move |source| CliError::Core { context, source }
    }
}
