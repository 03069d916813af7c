use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// Input outside the documented domain of an operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// Incompatible tensor/matrix shapes.
    #[error("shape mismatch: {0}")]
    Shape(String),

    /// Profile data file missing or malformed.
    #[error("profile load error ({path}): {reason}")]
    ProfileLoad { path: String, reason: String },

    /// Iterative SVD failed to reach the off-diagonal threshold.
    #[error("SVD did not converge within {sweeps} sweeps (off-diagonal {off:e})")]
    SvdNoConvergence { sweeps: usize, off: f64 },

    /// Dataset or checkpoint file malformed.
    #[error("format error: {0}")]
    Format(String),

    /// Training diverged (non-finite loss).
    #[error("training aborted: {0}")]
    Training(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("manifest error: {0}")]
    Manifest(String),
}
