use thiserror::Error;

/// Failure of an adaptive quadrature.
#[derive(Debug, Clone, Copy, PartialEq, Error)]
pub enum QuadError {
    #[error("quadrature did not converge: achieved error {achieved:.3e}, requested {requested:.3e}")]
    NotConverged { achieved: f64, requested: f64 },
    #[error("integrand produced a non-finite value")]
    NonFinite,
    #[error("invalid integration interval [{a}, {b}]")]
    BadInterval { a: f64, b: f64 },
}

/// Errors raised by the library.
///
/// The three families map onto distinct exit statuses of the command line
/// tool: invalid input, a theorem hypothesis that does not hold for the
/// model at hand, and numerical failure.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    Invalid(String),

    #[error("precondition refused ({hypothesis}): {detail}")]
    Refused { hypothesis: &'static str, detail: String },

    #[error(transparent)]
    Quadrature(#[from] QuadError),

    #[error("characteristic function has not decayed below {threshold:.1e} by cutoff {cutoff:.3e}; need cutoff beyond {required:.3e}")]
    HeavyTailedCf { cutoff: f64, threshold: f64, required: f64 },

    #[error("spectral grid has {0} flagged node(s); refusing to invert")]
    FlaggedNodes(usize),

    #[error("numerical failure: {0}")]
    Numerical(String),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::Invalid(msg.into())
    }

    pub(crate) fn refused(hypothesis: &'static str, detail: impl Into<String>) -> Self {
        Error::Refused { hypothesis, detail: detail.into() }
    }

    /// True for errors caused by a violated theorem hypothesis.
    pub fn is_refusal(&self) -> bool {
        matches!(self, Error::Refused { .. })
    }

    /// True for errors caused by malformed input.
    pub fn is_invalid(&self) -> bool {
        matches!(self, Error::Invalid(_))
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
