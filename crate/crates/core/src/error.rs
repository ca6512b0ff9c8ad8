use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("division by zero")]
    DivisionByZero,
    #[error("root of unity of order {0} is outside Q(zeta_24)")]
    UnsupportedConductor(i64),
    #[error("truncation {requested} exceeds available truncation {available}")]
    TruncationExceeded { requested: u32, available: u32 },
    #[error("matrix is not symplectic")]
    NotSymplectic,
    #[error("invalid characteristic: {0}")]
    InvalidCharacteristic(String),
    #[error("odd number of theta factors ({0}) in a slash product")]
    OddThetaProduct(usize),
    #[error("weight mismatch: {0}")]
    WeightMismatch(String),
    #[error("cannot slash {form} by this matrix: {reason}")]
    Unslashable { form: String, reason: String },
    #[error("unknown name: {0}")]
    UnknownName(String),
    #[error("parse error: {0}")]
    Parse(String),
    #[error("configuration error: {0}")]
    Config(String),
    #[error("value kind mismatch: {0}")]
    Kind(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
    #[error("internal error: {0}")]
    Internal(String),
}

pub type Result<T> = std::result::Result<T, Error>;
