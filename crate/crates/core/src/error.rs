use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("candidate positions must satisfy ell < r (got ell = {ell}, r = {r})")]
    Ordering { ell: f64, r: f64 },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("density rejected: {0}")]
    Density(String),

    #[error("kernel rejected: {0}")]
    Kernel(String),

    #[error(
        "quadrature did not converge after {subdivisions} subdivisions \
         (value {value:e}, error estimate {error_estimate:e})"
    )]
    Quadrature {
        subdivisions: usize,
        value: f64,
        error_estimate: f64,
    },

    #[error("non-finite value: {0}")]
    NonFinite(String),

    #[error("bracket rejected: {0}")]
    Bracket(String),
}

impl Error {
    /// True for failures of the numerics rather than of the inputs.
    pub fn is_numerical(&self) -> bool {
        matches!(self, Error::Quadrature { .. } | Error::NonFinite(_))
    }
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn check_order(ell: f64, r: f64) -> Result<()> {
    if ell < r {
        Ok(())
    } else {
        Err(Error::Ordering { ell, r })
    }
}
