use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid Cantor specification: {0}")]
    InvalidSpec(String),

    #[error("resource limit exceeded: {0}")]
    Resource(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("out of regime: {0}")]
    OutOfRegime(String),

    #[error("u_max = {u_max} exceeds the validity bound valid_u_max = {valid_u_max}")]
    Validity { u_max: f64, valid_u_max: f64 },

    #[error("fit error: {0}")]
    Fit(String),

    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, Error>;
