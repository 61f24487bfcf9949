use thiserror::Error;

use crate::model::{TaskId, WorkerId};

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid task {0}: {1}")]
    InvalidTask(TaskId, String),
    #[error("invalid worker {0}: {1}")]
    InvalidWorker(WorkerId, String),
    #[error("duplicate task id {0}")]
    DuplicateTask(TaskId),
    #[error("duplicate worker id {0}")]
    DuplicateWorker(WorkerId),
    #[error("unknown task id {0}")]
    UnknownTask(TaskId),
    #[error("unknown worker id {0}")]
    UnknownWorker(WorkerId),
    #[error("worker {0} is already assigned")]
    WorkerAlreadyAssigned(WorkerId),
    #[error("possible-world enumeration refused: {workers} workers exceeds cap {cap}")]
    OracleCapExceeded { workers: usize, cap: usize },
    #[error("empty input: {0}")]
    EmptyInput(&'static str),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("malformed input: {0}")]
    Format(String),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
