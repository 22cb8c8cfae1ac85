use sqm_core::SqmError;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Model(#[from] SqmError),
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("failed checks: {0}")]
    Failed(String),
}

impl CliError {
    /// 2 for bad input, 1 for failed computations and checks.
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Model(
                SqmError::InvalidParameters(_)
                | SqmError::InvalidPartition { .. }
                | SqmError::InvalidCounts(_)
                | SqmError::UnsupportedRegime(_)
                | SqmError::DimensionMismatch(..)
                | SqmError::OutOfRange { .. }
                | SqmError::DegenerateObservation
                | SqmError::NonFinite(_),
            ) => 2,
            _ => 1,
        }
    }
}

pub fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}
