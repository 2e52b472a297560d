//! Crate-wide error type.

use thiserror::Error;

/// Errors produced by the walk model, the numeric kernel and the analysis layers.
#[derive(Debug, Error)]
pub enum Error {
    /// Matrix or vector dimensions do not fit the operation.
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    /// A matrix that must be Hermitian is not, within tolerance.
    #[error("matrix is not Hermitian: deviation {deviation:.3e} exceeds {tol:.3e}")]
    NonHermitian { deviation: f64, tol: f64 },

    /// An iterative kernel failed to converge.
    #[error("numerical kernel failed to converge: {0}")]
    Convergence(String),

    /// A matrix required to be invertible is singular within tolerance.
    #[error("singular matrix: {0}")]
    Singular(String),

    /// A vertex label was not found in the walk.
    #[error("unknown site `{0}`")]
    UnknownSite(String),

    /// A transition matrix has the wrong shape for its edge.
    #[error("edge {from} -> {to}: Kraus operator #{index} is {got_rows}x{got_cols}, expected {want_rows}x{want_cols}")]
    EdgeShape {
        from: String,
        to: String,
        index: usize,
        got_rows: usize,
        got_cols: usize,
        want_rows: usize,
        want_cols: usize,
    },

    /// Two edges share the same ordered (from, to) pair.
    #[error("duplicate edge {from} -> {to}")]
    DuplicateEdge { from: String, to: String },

    /// A walk definition violates a structural rule other than shape.
    #[error("invalid walk: {0}")]
    InvalidWalk(String),

    /// The total-probability (stochasticity) condition fails.
    #[error("stochasticity violated at site `{site}`: deviation {deviation:.3e} exceeds {tol:.3e}")]
    Stochasticity {
        site: String,
        deviation: f64,
        tol: f64,
    },

    /// An operation that requires an irreducible walk was given a reducible one.
    #[error("walk is reducible: {0}")]
    Reducible(String),

    /// The peripheral spectrum does not match the expected root-of-unity group.
    #[error("peripheral spectrum diagnostic failed: {0}")]
    PeripheralMismatch(String),

    /// A spectral object is too degenerate to continue (e.g. non-invertible eigen-operator).
    #[error("numerical degeneracy: {0}")]
    Degenerate(String),

    /// An invalid argument outside the other categories.
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// Configuration parsing failed.
    #[error("config error: {0}")]
    Config(String),

    /// Builtin example lookup failed.
    #[error("unknown builtin `{name}`; available: {available}")]
    UnknownBuiltin { name: String, available: String },

    /// Filesystem failure while emitting reports.
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
