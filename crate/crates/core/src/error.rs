use thiserror::Error;

#[derive(Debug, Error)]
pub enum GcmError {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("energy {energy} lies below the potential minimum {minimum}")]
    BelowMinimum { energy: f64, minimum: f64 },

    #[error("trace of the Hamiltonian has no interior minimum in [{lo:e}, {hi:e}]")]
    NoInteriorMinimum { lo: f64, hi: f64 },

    #[error("eigenvalue iteration did not converge at index {index}")]
    NoConvergence { index: usize },

    #[error("ill-conditioned unfolding fit (condition number {condition:e}); try a lower degree")]
    IllConditioned { condition: f64 },

    #[error("degenerate data: {0}")]
    Degenerate(String),

    #[error("not enough data: need {needed}, got {got}")]
    NotEnoughData { needed: usize, got: usize },

    #[error("integration failed at t = {t}: {reason}")]
    Integration { t: f64, reason: String },

    #[error("config error: {0}")]
    Config(String),

    #[error("cache format error: {0}")]
    Cache(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error("{stage}: {source}")]
    Stage { stage: String, source: Box<GcmError> },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl GcmError {
    /// Tags the error with the pipeline stage it came from.
    pub fn in_stage(self, stage: impl Into<String>) -> Self {
        GcmError::Stage { stage: stage.into(), source: Box::new(self) }
    }

    /// Bad input from the user (exit code 2) as opposed to a computational failure.
    pub fn is_usage(&self) -> bool {
        match self {
            GcmError::Config(_) | GcmError::Parse(_) | GcmError::InvalidParameter(_) => true,
            GcmError::Stage { source, .. } => source.is_usage(),
            _ => false,
        }
    }

    pub fn exit_code(&self) -> i32 {
        if self.is_usage() {
            2
        } else {
            1
        }
    }
}

pub type Result<T> = std::result::Result<T, GcmError>;
