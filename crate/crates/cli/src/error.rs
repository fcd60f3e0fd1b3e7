use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("numerical failure: {0}")]
    Numeric(#[from] pclamb_core::Error),

    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),

    #[error("CSV output error: {0}")]
    Csv(#[from] csv::Error),

    #[error("metadata output error: {0}")]
    Json(#[from] serde_json::Error),
}

impl CliError {
    /// Process exit status: 3 configuration, 4 numerics, 5 I/O.
    /// (Usage errors exit with 2 from the argument parser.)
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 3,
            CliError::Numeric(_) => 4,
            CliError::Io(_) | CliError::Csv(_) | CliError::Json(_) => 5,
        }
    }
}
