use num_complex::Complex64;

use super::ofdm::CfrMeasurement;
use crate::error::{Error, Result};

/// Realified CSI: real parts of every subcarrier, then imaginary parts.
#[derive(Clone, Debug, PartialEq)]
pub struct CsiVector(Vec<f64>);

impl CsiVector {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() || !values.len().is_multiple_of(2) {
            return Err(Error::Shape(format!(
                "realified CSI needs an even, nonzero length, got {}",
                values.len()
            )));
        }
        Ok(Self(values))
    }

    pub fn zeros(dim: usize) -> Self {
        Self(vec![0.0; dim])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }

    pub fn energy(&self) -> f64 {
        self.0.iter().map(|v| v * v).sum()
    }

    /// Recombines the halves into complex subcarrier values.
    pub fn to_complex(&self) -> Vec<Complex64> {
        let half = self.0.len() / 2;
        (0..half)
            .map(|m| Complex64::new(self.0[m], self.0[half + m]))
            .collect()
    }
}

/// `[Re(H)ᵀ, Im(H)ᵀ]ᵀ`, same subcarrier order as the measurement.
pub fn csi_realify(cfr: &CfrMeasurement) -> CsiVector {
    let mut v: Vec<f64> = cfr.values.iter().map(|h| h.re).collect();
    v.extend(cfr.values.iter().map(|h| h.im));
    CsiVector(v)
}
