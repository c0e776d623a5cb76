//! OFDM frequency response and least-squares estimation noise.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::Rng;

use super::taps::{complex_normal, ChannelSnapshot};
use crate::error::{invalid, Result};

/// FFT size of a 20 MHz 802.11n channel.
pub const NUM_SUBCARRIERS: usize = 64;

/// Active subcarriers of the legacy long training field.
pub const NUM_ACTIVE: usize = 52;

/// Active subcarrier indices `{-26..-1, 1..26}` in ascending order.
pub fn active_subcarriers() -> Vec<i32> {
    (-26..=26).filter(|&m| m != 0).collect()
}

/// Per-subcarrier channel response of one packet.
#[derive(Clone, Debug, PartialEq)]
pub struct CfrMeasurement {
    pub values: Vec<Complex64>,
    /// Set once estimation noise has been added.
    pub noisy: bool,
}

impl CfrMeasurement {
    /// Mean `|H[m]|²` over the stored subcarriers.
    pub fn mean_power(&self) -> f64 {
        self.values.iter().map(|h| h.norm_sqr()).sum::<f64>() / self.values.len() as f64
    }
}

/// `H[m] = Σ_l h[l]·exp(-j2π m l / M)` at each requested subcarrier index.
pub fn cfr_from_taps(snap: &ChannelSnapshot, total: usize, indices: &[i32]) -> CfrMeasurement {
    let values = indices
        .iter()
        .map(|&m| {
            snap.taps
                .iter()
                .enumerate()
                .map(|(l, &h)| {
                    let phase = -2.0 * PI * m as f64 * l as f64 / total as f64;
                    h * Complex64::from_polar(1.0, phase)
                })
                .sum()
        })
        .collect();
    CfrMeasurement {
        values,
        noisy: false,
    }
}

/// Adds i.i.d. `CN(0, σ²)` noise with `σ² = P̄ / 10^(snr/10)`, `P̄` the mean
/// subcarrier power of this measurement. An infinite SNR adds nothing.
pub fn add_estimation_noise(
    cfr: &CfrMeasurement,
    snr_db: f64,
    rng: &mut impl Rng,
) -> Result<CfrMeasurement> {
    if cfr.noisy {
        return Err(invalid!("measurement already carries estimation noise"));
    }
    if snr_db.is_nan() {
        return Err(invalid!("SNR is NaN"));
    }
    let mut out = cfr.clone();
    out.noisy = true;
    if snr_db == f64::INFINITY {
        return Ok(out);
    }
    let sigma = (cfr.mean_power() / 10f64.powf(snr_db / 10.0)).sqrt();
    for v in &mut out.values {
        *v += complex_normal(rng) * sigma;
    }
    Ok(out)
}
