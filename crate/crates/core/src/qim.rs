//! Parity quantization of a single coefficient.

use crate::error::{Error, Result};

/// Quantization step. Must be positive and finite.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuantizerConfig {
    q: f64,
}

impl QuantizerConfig {
    pub const DEFAULT_STEP: f64 = 8.0;

    pub fn new(q: f64) -> Result<Self> {
        if !(q.is_finite() && q > 0.0) {
            return Err(Error::domain(format!(
                "quantization step must be positive, got {q}"
            )));
        }
        Ok(QuantizerConfig { q })
    }

    pub fn step(&self) -> f64 {
        self.q
    }

    pub fn embed(&self, coef: f64, bit: bool) -> f64 {
        embed_bit(coef, bit, self.q)
    }

    pub fn extract(&self, coef: f64) -> bool {
        extract_bit(coef, self.q)
    }
}

impl Default for QuantizerConfig {
    fn default() -> Self {
        QuantizerConfig {
            q: Self::DEFAULT_STEP,
        }
    }
}

/// Moves `coef` onto a multiple of `q` whose quotient has parity `bit`:
/// down to `floor(coef/q) * q` when the parity already matches, otherwise
/// up to the next multiple.
pub fn embed_bit(coef: f64, bit: bool, q: f64) -> f64 {
    let m = (coef / q).floor();
    if parity(m) == bit {
        m * q
    } else {
        (m + 1.0) * q
    }
}

/// Parity of `round(coef / q)`, rounding halves away from zero.
pub fn extract_bit(coef: f64, q: f64) -> bool {
    parity((coef / q).round())
}

fn parity(m: f64) -> bool {
    m.rem_euclid(2.0) == 1.0
}
