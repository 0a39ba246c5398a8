use crate::error::{Error, Result};
use serde::Serialize;

/// Intensity and connection radius of the point process.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ModelParams {
    lambda: f64,
    epsilon: f64,
}

impl ModelParams {
    pub fn new(lambda: f64, epsilon: f64) -> Result<Self> {
        check_positive("lambda", lambda)?;
        check_positive("epsilon", epsilon)?;
        Ok(Self { lambda, epsilon })
    }

    /// Points per unit length.
    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    /// Connection radius.
    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    /// `lambda * exp(-lambda * epsilon)`, the rate at which clusters close.
    pub fn closing_rate(&self) -> f64 {
        self.lambda * (-self.lambda * self.epsilon).exp()
    }

    /// Probability that a point has no successor within `epsilon`.
    pub fn isolation_prob(&self) -> f64 {
        (-self.lambda * self.epsilon).exp()
    }
}

/// A model restricted to a domain of length `L` (interval or circle).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct IntervalModel {
    pub params: ModelParams,
    length: f64,
}

impl IntervalModel {
    pub fn new(params: ModelParams, length: f64) -> Result<Self> {
        check_positive("length", length)?;
        Ok(Self { params, length })
    }

    pub fn from_parts(lambda: f64, epsilon: f64, length: f64) -> Result<Self> {
        Self::new(ModelParams::new(lambda, epsilon)?, length)
    }

    pub fn length(&self) -> f64 {
        self.length
    }

    pub fn lambda(&self) -> f64 {
        self.params.lambda()
    }

    pub fn epsilon(&self) -> f64 {
        self.params.epsilon()
    }

    /// Largest number of complete clusters that fit: `floor(L / epsilon)`.
    ///
    /// A relative slack of 1e-12 keeps exact multiples from flickering down; the
    /// extra summand it may admit is identically zero.
    pub fn max_clusters(&self) -> usize {
        lattice_floor(self.length, self.params.epsilon())
    }

    pub fn with_length(&self, length: f64) -> Result<Self> {
        Self::new(self.params, length)
    }

    pub fn with_lambda(&self, lambda: f64) -> Result<Self> {
        Self::new(ModelParams::new(lambda, self.params.epsilon())?, self.length)
    }
}

/// `floor(x / epsilon + 1e-12)` clamped at zero.
pub(crate) fn lattice_floor(x: f64, epsilon: f64) -> usize {
    if x <= 0.0 {
        return 0;
    }
    (x / epsilon + 1e-12).floor() as usize
}

fn check_positive(name: &'static str, value: f64) -> Result<()> {
    if !value.is_finite() || value <= 0.0 {
        return Err(Error::InvalidParameter {
            name,
            reason: format!("must be finite and > 0, got {value}"),
        });
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_non_positive() {
        assert!(ModelParams::new(0.0, 1.0).is_err());
        assert!(ModelParams::new(1.0, -1.0).is_err());
        assert!(ModelParams::new(f64::NAN, 1.0).is_err());
        assert!(IntervalModel::from_parts(1.0, 1.0, 0.0).is_err());
        assert!(IntervalModel::from_parts(1.0, 1.0, f64::INFINITY).is_err());
    }

    #[test]
    fn floor_at_exact_multiples() {
        let m = IntervalModel::from_parts(1.0, 0.1, 0.3).unwrap();
        // 0.3 / 0.1 = 2.9999999999999996 in binary
        assert_eq!(m.max_clusters(), 3);
        let m = IntervalModel::from_parts(1.0, 1.0, 0.5).unwrap();
        assert_eq!(m.max_clusters(), 0);
    }
}
