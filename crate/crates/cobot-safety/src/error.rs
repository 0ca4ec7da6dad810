//! Crate-wide error type.

/// Errors produced by configuration, planning and simulation.
#[derive(thiserror::Error, Debug)]
pub enum Error {
    /// Invalid or inconsistent configuration (rejected at startup).
    #[error("configuration error: {0}")]
    Config(String),

    /// A joint position outside its configured limits.
    #[error("joint {joint} position {value} rad outside [{min}, {max}]")]
    JointLimit {
        joint: usize,
        value: f64,
        min: f64,
        max: f64,
    },

    /// An argument outside its documented domain.
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// Malformed replay input, with the offending line.
    #[error("replay parse error at line {line}: {message}")]
    Replay { line: usize, message: String },

    /// A runtime safety or consistency invariant was violated during simulation.
    #[error("simulation invariant violated: {0}")]
    Invariant(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
