//! Error type shared by the geometry constructors, forward model, and solvers.

/// Errors produced by this crate.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    /// A geometric precondition was violated (degenerate extent, zero
    /// subdivisions, observation plane touching the continuation plane, ...).
    #[error("invalid geometry: {0}")]
    InvalidGeometry(String),

    /// The continuation depth is not strictly positive.
    #[error("invalid depth {depth}: the continuation plane must lie strictly below the observation surface")]
    InvalidDepth { depth: f64 },

    /// Two points of an evaluation pair are closer than the geometric
    /// separation limit, so the Newtonian kernel cannot be evaluated.
    #[error("singular kernel: point ({}, {}, {}) and point ({}, {}, {}) are closer than {limit:e}{context}",
            x[0], x[1], x[2], y[0], y[1], y[2])]
    SingularKernel {
        x: [f64; 3],
        y: [f64; 3],
        limit: f64,
        context: String,
    },

    /// Operand dimensions do not agree.
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    /// An input contains NaN or infinity.
    #[error("non-finite value in {0}")]
    NonFiniteData(String),

    /// A hard size limit was exceeded (e.g. the exhaustive solver bound).
    #[error("capacity exceeded: {0}")]
    Capacity(String),

    /// The call itself is malformed (empty input, inverted range, ...).
    #[error("usage: {0}")]
    Usage(String),
}

pub type Result<T> = std::result::Result<T, Error>;
