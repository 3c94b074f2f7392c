use thiserror::Error;

/// Errors reported by the processing, analysis and design routines.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid transform size: {0}")]
    InvalidSize(usize),
    #[error("invalid overlap: non-overlapping length {ls} exceeds block length {l}")]
    InvalidOverlap { l: usize, ls: usize },
    #[error("framing error: {0}")]
    Framing(String),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("weight mask mismatch: {0}")]
    Mask(String),
    #[error("subcarrier allocation error: {0}")]
    Allocation(String),
    #[error("value out of range: {0}")]
    OutOfRange(String),
    #[error("infeasible design: {0}")]
    Infeasible(String),
    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, Error>;
