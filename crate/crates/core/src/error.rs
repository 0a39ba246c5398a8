use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid parameter {name}: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("{what} is only supported up to {bound}, got {requested}")]
    Capacity {
        what: &'static str,
        bound: usize,
        requested: usize,
    },

    #[error("argument outside the domain: {0}")]
    Domain(String),

    #[error("distribution does not normalize: tail mass {tail_mass:e} exceeds {tolerance:e}")]
    Normalization { tail_mass: f64, tolerance: f64 },

    #[error("the mean cluster count has no interior maximum when L <= epsilon")]
    NoMaximum,

    #[error("quadrature did not converge: last estimate {estimate} with error {error_estimate:e}")]
    Quadrature { estimate: f64, error_estimate: f64 },

    #[error("contract violation: {0}")]
    Contract(String),
}

/// Raised alongside a value when an alternating sum lost too many digits.
///
/// `estimate` is `eps * sum(|term|) / |result|`, a bound on the relative error
/// of the returned value.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct PrecisionWarning {
    pub estimate: f64,
}

impl std::fmt::Display for PrecisionWarning {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "cancellation estimate {:e} exceeds 1e-9", self.estimate)
    }
}
