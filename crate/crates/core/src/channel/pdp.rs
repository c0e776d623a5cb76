use crate::error::{invalid, Error, Result};

/// Fraction of the untruncated exponential energy the kept taps must hold.
pub const ENERGY_CAPTURE: f64 = 0.999;

/// Relative tolerance on the discrete RMS delay spread of a solved profile.
pub const RMS_TOLERANCE: f64 = 0.02;

/// Exponential power delay profile sampled at the OFDM sample spacing.
#[derive(Clone, Debug, PartialEq)]
pub struct PdpProfile {
    /// Requested RMS delay spread.
    pub trms_ns: f64,
    /// Tap spacing, `1e9 / bandwidth`.
    pub tap_spacing_ns: f64,
    powers: Vec<f64>,
}

impl PdpProfile {
    /// Flat-fading profile: one tap carrying all the energy.
    pub fn single_tap(bandwidth_hz: f64) -> Self {
        Self {
            trms_ns: 0.0,
            tap_spacing_ns: 1e9 / bandwidth_hz,
            powers: vec![1.0],
        }
    }

    pub fn num_taps(&self) -> usize {
        self.powers.len()
    }

    /// Mean tap powers, normalized to sum to one.
    pub fn powers(&self) -> &[f64] {
        &self.powers
    }

    /// Discrete RMS delay spread of the stored powers.
    pub fn rms_delay_ns(&self) -> f64 {
        rms_delay(&self.powers, self.tap_spacing_ns)
    }
}

fn rms_delay(powers: &[f64], spacing: f64) -> f64 {
    let total: f64 = powers.iter().sum();
    let mean: f64 = powers
        .iter()
        .enumerate()
        .map(|(l, p)| p * l as f64 * spacing)
        .sum::<f64>()
        / total;
    let second: f64 = powers
        .iter()
        .enumerate()
        .map(|(l, p)| p * (l as f64 * spacing).powi(2))
        .sum::<f64>()
        / total;
    (second - mean * mean).max(0.0).sqrt()
}

/// Tap count capturing [`ENERGY_CAPTURE`] of `Σ r^l`: smallest `L` with `r^L ≤ 1 - capture`.
fn taps_for_ratio(ratio: f64) -> usize {
    let l = ((1.0 - ENERGY_CAPTURE).ln() / ratio.ln()).ceil();
    (l as usize).max(1)
}

fn geometric_powers(ratio: f64, taps: usize) -> Vec<f64> {
    let mut p: Vec<f64> = (0..taps).map(|l| ratio.powi(l as i32)).collect();
    let s: f64 = p.iter().sum();
    p.iter_mut().for_each(|v| *v /= s);
    p
}

/// Solves the exponential profile `p_l ∝ exp(-l·Ts/τ)` whose truncated,
/// normalized discrete RMS delay spread equals `trms_ns`.
///
/// The decay ratio `r = exp(-Ts/τ)` is found by bisection; the tap count for
/// each candidate `r` follows from [`ENERGY_CAPTURE`].
pub fn make_pdp(trms_ns: f64, bandwidth_hz: f64) -> Result<PdpProfile> {
    if !(trms_ns > 0.0 && trms_ns.is_finite()) {
        return Err(invalid!("trms must be positive, got {trms_ns} ns"));
    }
    if !(bandwidth_hz > 0.0 && bandwidth_hz.is_finite()) {
        return Err(invalid!("bandwidth must be positive, got {bandwidth_hz} Hz"));
    }
    let spacing = 1e9 / bandwidth_hz;
    if trms_ns < spacing / 10.0 {
        return Err(invalid!(
            "trms {trms_ns} ns is below a tenth of the {spacing} ns tap spacing; \
             use PdpProfile::single_tap"
        ));
    }
    let rms_at = |r: f64| {
        let p = geometric_powers(r, taps_for_ratio(r));
        rms_delay(&p, spacing)
    };
    let (mut lo, mut hi) = (1e-9_f64, 1.0 - 1e-9);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if rms_at(mid) < trms_ns {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let ratio = 0.5 * (lo + hi);
    let powers = geometric_powers(ratio, taps_for_ratio(ratio));
    let achieved = rms_delay(&powers, spacing);
    if ((achieved - trms_ns) / trms_ns).abs() > RMS_TOLERANCE {
        return Err(Error::Numerical(format!(
            "exponential profile reaches {achieved:.3} ns, wanted {trms_ns} ns"
        )));
    }
    Ok(PdpProfile {
        trms_ns,
        tap_spacing_ns: spacing,
        powers,
    })
}
