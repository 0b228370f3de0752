use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::tensor::SpectrogramTensor;

/// Magnitude compression `c ↦ β|c|^α e^{i∠c}`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CompressionParams {
    pub beta: f64,
    pub alpha: f64,
}

impl Default for CompressionParams {
    fn default() -> Self {
        Self {
            beta: 0.15,
            alpha: 0.5,
        }
    }
}

impl CompressionParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.beta.is_finite() && self.beta > 0.0) {
            return Err(Error::Config(format!("beta must be > 0, got {}", self.beta)));
        }
        if !(self.alpha > 0.0 && self.alpha <= 1.0) {
            return Err(Error::Config(format!("alpha must be in (0, 1], got {}", self.alpha)));
        }
        Ok(())
    }
}

pub fn compress<T: Real>(
    spec: &SpectrogramTensor<T>,
    p: &CompressionParams,
) -> Result<SpectrogramTensor<T>> {
    p.validate()?;
    let beta = T::lit(p.beta);
    let alpha = T::lit(p.alpha);
    Ok(spec.map(|c| {
        let m = c.norm();
        if m == T::zero() {
            c
        } else {
            c * (beta * m.powf(alpha - T::one()))
        }
    }))
}

/// Exact inverse of [`compress`]: `|c| ↦ (|c|/β)^{1/α}`.
pub fn decompress<T: Real>(
    spec: &SpectrogramTensor<T>,
    p: &CompressionParams,
) -> Result<SpectrogramTensor<T>> {
    p.validate()?;
    let beta = T::lit(p.beta);
    let inv_alpha = T::one() / T::lit(p.alpha);
    Ok(spec.map(|c| {
        let m = c.norm();
        if m == T::zero() {
            c
        } else {
            c * ((m / beta).powf(inv_alpha) / m)
        }
    }))
}
