use thiserror::Error;

use fedgbp_core::api::ClientError;
use fedgbp_core::ledger::LedgerError;

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("{series} at {param} has {got} samples, at least {need} are required")]
    InsufficientSamples {
        series: String,
        param: u64,
        got: usize,
        need: usize,
    },
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error(transparent)]
    Ledger(#[from] LedgerError),
    #[error(transparent)]
    Client(#[from] ClientError),
    #[error("transaction {0} did not commit as valid")]
    Invalidated(String),
    #[error("map request unexpectedly denied: {0}")]
    Denied(String),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}
