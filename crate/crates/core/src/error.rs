use thiserror::Error;

#[derive(Debug, Error)]
pub enum LdgError {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("unsupported quadrature degree {degree} (max {max})")]
    UnsupportedDegree { degree: usize, max: usize },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("index {index} out of range (len {len})")]
    OutOfRange { index: usize, len: usize },

    #[error("Newton iteration did not converge{}: {reason} (iterations {iterations}, |r| = {residual:.3e})", stage.map(|p| format!(" at p = {p}")).unwrap_or_default())]
    NonConvergence {
        reason: String,
        iterations: usize,
        residual: f64,
        stage: Option<f64>,
    },

    #[error("sparse factorization failed: {0}")]
    SingularFactorization(String),

    #[error("level {level}: {source}")]
    AtLevel {
        level: usize,
        #[source]
        source: Box<LdgError>,
    },

    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl LdgError {
    /// True for Newton failures, possibly wrapped with level context.
    pub fn is_non_convergence(&self) -> bool {
        match self {
            LdgError::NonConvergence { .. } => true,
            LdgError::AtLevel { source, .. } => source.is_non_convergence(),
            _ => false,
        }
    }
}

pub type Result<T> = std::result::Result<T, LdgError>;
