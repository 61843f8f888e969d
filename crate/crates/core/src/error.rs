use thiserror::Error;

/// Errors raised while executing a P system.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EngineError {
    #[error("unknown membrane label '{0}'")]
    UnknownLabel(String),
    #[error("invalid system: {0}")]
    Invalid(String),
    #[error("step {step}: rules {first} and {second} compete for {symbol} in region '{region}' without a priority between them")]
    Ambiguity {
        step: usize,
        region: String,
        symbol: String,
        first: String,
        second: String,
    },
}

/// Errors raised while compiling a game instance into P systems.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum BuildError {
    #[error("invalid game: {}", .0.join("; "))]
    InvalidGame(Vec<String>),
    #[error("coefficient {name} = {value} is negative and cannot be a multiplicity")]
    NegativeCoefficient { name: String, value: f64 },
    #[error("coefficient {name} = {value} exceeds the 64-bit integer range")]
    Overflow { name: String, value: f64 },
    #[error("loop limit must be at least 1 to build the P system")]
    ZeroLoops,
}

/// Errors from reading or writing game spec files.
#[derive(Debug, Error)]
pub enum SpecFileError {
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("parse: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("serialize: {0}")]
    Serialize(#[from] toml::ser::Error),
}

/// Errors from the numerical reference.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum OracleError {
    #[error("{what} has length {got} but expected {expected}")]
    Shape {
        what: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("player {0} does not exist")]
    NoSuchPlayer(usize),
    #[error(transparent)]
    Build(#[from] BuildError),
}

/// Errors from reading `.pspec` text.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PspecError {
    #[error("{line}:{column}: {message}")]
    Syntax {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("invalid system: {}", .0.join("; "))]
    Invalid(Vec<String>),
}
