use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("argument {x} outside domain [{lo}, {hi}]")]
    Domain { x: f64, lo: f64, hi: f64 },

    #[error("derivative order {0} not supported (expected 0, 1 or 2)")]
    Order(u8),

    #[error("{op} is not defined for {variant} base points")]
    UnsupportedVariant {
        op: &'static str,
        variant: &'static str,
    },

    #[error("pre-orbit depth {requested} requested but only {available} digits are available")]
    InsufficientDepth { requested: usize, available: usize },

    #[error("fixed points out of order: p0 = {p0} must lie below p1 = {p1}")]
    Ordering { p0: f64, p1: f64 },

    #[error("fibre coordinate {x} left band [{lo}, {hi}] at step {step}")]
    LeftBand { x: f64, lo: f64, hi: f64, step: usize },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },

    #[error("validation failed: {0}")]
    Validation(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub(crate) fn numerical(msg: impl Into<String>) -> Self {
        Error::Numerical(msg.into())
    }
}
