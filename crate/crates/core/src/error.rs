use thiserror::Error;

/// Errors produced by the flow, decomposition and I/O routines.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("negative evaluation time {0}")]
    NegativeTime(f64),

    /// A consistency check between two independent routes failed. This points
    /// at a bug, not at bad input.
    #[error("internal consistency check failed: {0}")]
    Internal(String),

    #[error("segment {segment} has only {samples} samples in [{tau_lo}, {tau_hi}); use dt <= {required_dt:.6e}")]
    UnderSampled {
        segment: usize,
        samples: usize,
        tau_lo: f64,
        tau_hi: f64,
        required_dt: f64,
    },

    #[error("cannot project onto a vanishing decaying mode in segment {0}")]
    VanishingMode(usize),

    #[error("anisotropic flow stalled at step {step}: row and column subgradients cancel while J_ani = {tv:.3e}")]
    Stall { step: usize, tv: f64 },

    #[error("inner solver did not converge at outer step {step} (t = {time:.6}): dual change {residual:.3e} after {iterations} iterations")]
    NonConvergence {
        step: usize,
        time: f64,
        iterations: usize,
        residual: f64,
    },

    #[error("reference flow still has J = {tv_ratio:.3e} J(f) at t = {time:.6} after {steps} steps")]
    StepLimit { steps: usize, time: f64, tv_ratio: f64 },

    #[error("parse error at {location}: {message}")]
    Parse { location: String, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    /// True for failures of the numerical routines, as opposed to bad input or I/O.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::Internal(_)
                | Error::UnderSampled { .. }
                | Error::VanishingMode(_)
                | Error::Stall { .. }
                | Error::NonConvergence { .. }
                | Error::StepLimit { .. }
        )
    }
}
