use thiserror::Error;

use crate::auxiliary::Covering;


pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("integral over [{a}, {b}] diverges at an infinite endpoint")]
    NonIntegrableTail { a: f64, b: f64 },
    #[error("quadrature did not converge (estimate {value:e}, error {error:e})")]
    QuadratureFailed { value: f64, error: f64 },
    #[error("integrand is not finite at t = {at}")]
    NonFinite { at: f64 },
    #[error("invalid coefficients: {0}")]
    InvalidCoefficients(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("1/r is not integrable over the line, the model equation has no principal system")]
    ModelRequiresIntegrableInvR,
    #[error("no principal system construction applies: {0}")]
    PfssUnavailable(String),
    #[error("asymptotic matching failed: {0}")]
    MatchingFailed(String),
    #[error("ode integration failed: {0}")]
    OdeFailed(String),
    #[error("root bracketing failed: {0}")]
    BracketingFailed(String),
    #[error("operation requires the limit condition on windowed integrals of 1/r and q")]
    RegimeError,
    #[error("covering stalled after {} segments", partial.segments.len())]
    CoveringStalled { partial: Covering },
    #[error("row integral did not converge at x = {x}")]
    NonConvergentRow { x: f64 },
    #[error("reduction to the model equation unavailable: {0}")]
    ReductionUnavailable(String),
    #[error("point {x} lies outside the numerical domain [{lo}, {hi}]")]
    OutsideDomain { x: f64, lo: f64, hi: f64 },
    #[error("i/o error: {0}")]
    Io(String),
    #[error("parse error: {0}")]
    Parse(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Parse(e.to_string())
    }
}

impl Error {
    /// Stable short identifier, used in sweep rows and by the C interface.
    pub fn code(&self) -> &'static str {
        match self {
            Error::NonIntegrableTail { .. } => "non_integrable_tail",
            Error::QuadratureFailed { .. } => "quadrature_failed",
            Error::NonFinite { .. } => "non_finite",
            Error::InvalidCoefficients(_) => "invalid_coefficients",
            Error::InvalidArgument(_) => "invalid_argument",
            Error::ModelRequiresIntegrableInvR => "model_requires_integrable_inv_r",
            Error::PfssUnavailable(_) => "pfss_unavailable",
            Error::MatchingFailed(_) => "matching_failed",
            Error::OdeFailed(_) => "ode_failed",
            Error::BracketingFailed(_) => "bracketing_failed",
            Error::RegimeError => "regime_error",
            Error::CoveringStalled { .. } => "covering_stalled",
            Error::NonConvergentRow { .. } => "non_convergent_row",
            Error::ReductionUnavailable(_) => "reduction_unavailable",
            Error::OutsideDomain { .. } => "outside_domain",
            Error::Io(_) => "io",
            Error::Parse(_) => "parse",
        }
    }
}
