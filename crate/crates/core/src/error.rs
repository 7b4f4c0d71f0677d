use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{what}: expected a square matrix, got {rows}x{cols}")]
    NotSquare {
        what: &'static str,
        rows: usize,
        cols: usize,
    },

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("{0}: matrix contains non-finite entries")]
    NonFinite(String),

    #[error("eigenvalue iteration did not converge")]
    NoConvergence,

    #[error("{what} is not Hurwitz (largest real part {max_real:e})")]
    NotHurwitz { what: String, max_real: f64 },

    #[error("Hamiltonian has eigenvalues on the imaginary axis; the distance condition is violated and the ARE has no stabilizing solution")]
    NotHyperbolic,

    #[error("stable invariant subspace is ill-conditioned: {0}")]
    IllConditioned(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("unknown subsystem id `{0}`")]
    UnknownSubsystem(String),

    #[error("edge {from} -> {to}: {reason}")]
    Edge {
        from: String,
        to: String,
        reason: String,
    },

    #[error("no admissible epsilon: distance margin {0:e} is not positive")]
    NoMargin(f64),

    #[error("transient bound is complex: radicand {0:e} < 0")]
    InvalidBound(f64),

    #[error("projection gradient vanished while the boundary case was active")]
    DegenerateGradient,

    #[error("distributed predictor needs neighbour state: {0}")]
    MissingNeighbor(String),
}

pub type Result<T> = std::result::Result<T, Error>;
