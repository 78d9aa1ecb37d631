use thiserror::Error;

#[derive(Error, Debug)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] exponent_core::Error),
    #[error("malformed rate grid {text:?}: {reason}")]
    Grid { text: String, reason: String },
    #[error("{0}")]
    Usage(String),
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
}

impl CliError {
    /// Short class name printed before the message.
    pub fn class(&self) -> &'static str {
        match self {
            CliError::Core(e) => e.kind(),
            CliError::Grid { .. } => "rate-grid",
            CliError::Usage(_) => "usage",
            CliError::Io { .. } => "io",
        }
    }
}
