//! The Hoeffding concentration bound used by the split tests.

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
#[error("invalid Hoeffding bound parameters: {0}")]
pub struct BoundError(pub String);

/// Parameters of one bound evaluation: value range, confidence and sample
/// count. Invariants are enforced at construction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HoeffdingBoundParams {
    range: f64,
    delta: f64,
    n: u64,
}

impl HoeffdingBoundParams {
    pub fn new(range: f64, delta: f64, n: u64) -> Result<Self, BoundError> {
        if !(range >= 0.0 && range.is_finite()) {
            return Err(BoundError(format!("range must be a non-negative real, got {range}")));
        }
        if !(delta > 0.0 && delta < 1.0) {
            return Err(BoundError(format!("delta must be in (0,1), got {delta}")));
        }
        if n == 0 {
            return Err(BoundError("n must be positive".into()));
        }
        Ok(HoeffdingBoundParams { range, delta, n })
    }

    pub fn range(&self) -> f64 {
        self.range
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn n(&self) -> u64 {
        self.n
    }
}

/// epsilon = sqrt(R^2 ln(1/delta) / (2n)).
///
/// With confidence 1 - delta the true mean of a variable with range R lies
/// within epsilon of the mean of n observations.
pub fn hoeffding_epsilon(p: HoeffdingBoundParams) -> f64 {
    (p.range * p.range * (1.0 / p.delta).ln() / (2.0 * p.n as f64)).sqrt()
}
