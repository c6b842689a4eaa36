use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("impossible prefix: probability 0 reached at symbol {position}")]
    ImpossiblePrefix { position: usize },

    #[error("block length {k} outside the enumerable range 1..={max}")]
    BlockLengthOutOfRange { k: usize, max: usize },

    #[error(
        "order {order} too large for exact block enumeration (limit {max}); use the Monte Carlo estimator"
    )]
    OrderTooLarge { order: usize, max: usize },

    #[error("invalid symbol {0}; the alphabet is {{0, 1}}")]
    InvalidSymbol(u8),

    #[error("invalid source: {0}")]
    InvalidSource(String),

    #[error("invalid hypothesis: {0}")]
    InvalidHypothesis(String),

    #[error("invalid prior: {0}")]
    InvalidPrior(String),

    #[error("invalid schedule: {0}")]
    InvalidSchedule(String),

    #[error("fitness values must be strictly positive (member {index} has {value})")]
    NonPositiveFitness { index: usize, value: f64 },

    #[error("fitness vector has {got} entries, ensemble has {expected} members")]
    FitnessLength { got: usize, expected: usize },

    #[error("empty hypothesis set at t = {t}")]
    EmptySet { t: usize },

    #[error("path length {got} does not match the ensemble time {expected}")]
    PathLength { got: usize, expected: usize },

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },
}

pub type Result<T> = std::result::Result<T, Error>;
