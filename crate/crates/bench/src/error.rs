use thiserror::Error;

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl BenchError {
    /// Process exit code: 2 for configuration problems, 1 otherwise.
    pub fn exit_code(&self) -> u8 {
        match self {
            BenchError::Config(_) => 2,
            _ => 1,
        }
    }
}

impl From<optiq::Error> for BenchError {
    fn from(e: optiq::Error) -> Self {
        match e {
            optiq::Error::Config(msg) => BenchError::Config(msg),
            other => BenchError::Config(other.to_string()),
        }
    }
}
