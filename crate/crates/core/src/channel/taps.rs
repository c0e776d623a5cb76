//! Time-correlated Rayleigh taps (Clarke model) and the spoofer's channel.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

use super::bessel::j0;
use super::pdp::PdpProfile;
use crate::error::{invalid, Error, Result};
use crate::seed;

/// Speed of light, m/s.
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// Diagonal loading added to the temporal covariance before factorization.
pub const COVARIANCE_JITTER: f64 = 1e-10;

/// Longest exact prediction order. Packets beyond it are drawn from the
/// order-`MAX_ORDER` predictor, which keeps every window of `MAX_ORDER + 1`
/// consecutive packets exactly distributed. Past a few hundred orders the
/// innovation variance sits at the jitter level and the recursion loses all
/// precision, so higher orders would add round-off rather than accuracy.
pub const MAX_ORDER: usize = 256;

/// Tap gains of one channel at one packet time.
#[derive(Clone, Debug, PartialEq)]
pub struct ChannelSnapshot {
    pub packet_index: usize,
    pub taps: Vec<Complex64>,
}

/// Second-order description of a fading channel.
#[derive(Clone, Debug, PartialEq)]
pub struct FadingProcess {
    pub pdp: PdpProfile,
    pub doppler_hz: f64,
    /// Packet spacing in milliseconds.
    pub dt_ms: f64,
}

impl FadingProcess {
    /// Normalized temporal autocorrelation `J0(2π f_d m Δt)` at lag `m` packets.
    pub fn autocorrelation(&self, lag: usize) -> f64 {
        j0(2.0 * PI * self.doppler_hz * lag as f64 * self.dt_ms * 1e-3)
    }
}

/// A generated channel trajectory together with the process that produced it.
#[derive(Clone, Debug, PartialEq)]
pub struct TapSequence {
    pub process: FadingProcess,
    pub snapshots: Vec<ChannelSnapshot>,
}

impl TapSequence {
    pub fn len(&self) -> usize {
        self.snapshots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.snapshots.is_empty()
    }

    /// Gains of tap `l` over time.
    pub fn tap_series(&self, l: usize) -> Vec<Complex64> {
        self.snapshots.iter().map(|s| s.taps[l]).collect()
    }
}

/// Maximum Doppler shift `v·f_c/c`.
pub fn doppler_freq(speed_mps: f64, carrier_hz: f64) -> f64 {
    speed_mps * carrier_hz / SPEED_OF_LIGHT
}

/// Clarke spatial correlation `J0(2π d/λ)` between two antennas `d` metres apart.
pub fn spatial_correlation(distance_m: f64, carrier_hz: f64) -> f64 {
    let wavelength = SPEED_OF_LIGHT / carrier_hz;
    j0(2.0 * PI * distance_m / wavelength)
}

/// Draws `n` snapshots of a fading process.
///
/// Each tap is an independent circularly-symmetric complex Gaussian process
/// with variance equal to its PDP power and autocorrelation
/// [`FadingProcess::autocorrelation`]. The Toeplitz covariance (plus
/// [`COVARIANCE_JITTER`]) is factored by the Levinson recursion, which yields
/// its Cholesky factor one row at a time without storing it; white samples are
/// colored row by row. Sequences longer than [`MAX_ORDER`]` + 1` continue with
/// the order-[`MAX_ORDER`] predictor. A zero Doppler shift gives a constant
/// channel.
pub fn gen_tap_sequence(process: &FadingProcess, n: usize, seed: u64) -> Result<TapSequence> {
    if n == 0 {
        return Err(invalid!("sequence length must be at least 1"));
    }
    if !(process.doppler_hz >= 0.0 && process.dt_ms > 0.0) {
        return Err(invalid!(
            "need doppler >= 0 and dt > 0, got {} Hz / {} ms",
            process.doppler_hz,
            process.dt_ms
        ));
    }
    let mut rng = seed::rng(seed);
    let taps = process.pdp.num_taps();
    // series[l][t]
    let mut series: Vec<Vec<Complex64>> = vec![Vec::with_capacity(n); taps];

    if process.doppler_hz == 0.0 {
        for (l, s) in series.iter_mut().enumerate() {
            let g = complex_normal(&mut rng) * process.pdp.powers()[l].sqrt();
            s.resize(n, g);
        }
    } else {
        let mut white: Vec<Vec<Complex64>> = vec![Vec::with_capacity(n); taps];
        for _ in 0..n {
            for w in white.iter_mut() {
                w.push(complex_normal(&mut rng));
            }
        }
        let acf: Vec<f64> = (0..n).map(|m| process.autocorrelation(m)).collect();
        color_in_place(&acf, &mut white)?;
        for (l, (s, w)) in series.iter_mut().zip(white).enumerate() {
            let amp = process.pdp.powers()[l].sqrt();
            s.extend(w.into_iter().map(|v| v * amp));
        }
    }

    let snapshots = (0..n)
        .map(|t| ChannelSnapshot {
            packet_index: t,
            taps: series.iter().map(|s| s[t]).collect(),
        })
        .collect();
    Ok(TapSequence {
        process: process.clone(),
        snapshots,
    })
}

/// Spoofer channel at `distance_m` from the legitimate transmitter.
///
/// Every tap is `ρ_s·bob + sqrt(1-ρ_s²)·w` where `w` is an independent draw of
/// the same fading process and `ρ_s` is [`spatial_correlation`].
pub fn gen_attacker_sequence(
    bob: &TapSequence,
    distance_m: f64,
    carrier_hz: f64,
    seed: u64,
) -> Result<TapSequence> {
    if !(distance_m >= 0.0 && carrier_hz > 0.0) {
        return Err(invalid!(
            "need distance >= 0 and carrier > 0, got {distance_m} m / {carrier_hz} Hz"
        ));
    }
    let rho = spatial_correlation(distance_m, carrier_hz);
    let own = gen_tap_sequence(&bob.process, bob.len(), seed)?;
    let mix = (1.0 - rho * rho).max(0.0).sqrt();
    let snapshots = bob
        .snapshots
        .iter()
        .zip(&own.snapshots)
        .map(|(b, w)| ChannelSnapshot {
            packet_index: b.packet_index,
            taps: b
                .taps
                .iter()
                .zip(&w.taps)
                .map(|(&hb, &hw)| hb * rho + hw * mix)
                .collect(),
        })
        .collect();
    Ok(TapSequence {
        process: bob.process.clone(),
        snapshots,
    })
}

pub(crate) fn complex_normal(rng: &mut impl Rng) -> Complex64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

/// Colors unit-variance white sequences with the symmetric Toeplitz
/// covariance whose first row is `acf` (diagonal loaded by the jitter).
///
/// Row `t` of the Cholesky factor is the Levinson predictor of order `t`:
/// `x_t = Σ_j a_{t,j} x_{t-j} + sqrt(v_t) e_t`, frozen at order
/// [`MAX_ORDER`]. Works in place, all series sharing one recursion.
pub(crate) fn color_in_place(acf: &[f64], series: &mut [Vec<Complex64>]) -> Result<()> {
    let n = acf.len();
    if series.iter().any(|s| s.len() != n) {
        return Err(Error::Shape("white series length differs from covariance".into()));
    }
    let r0 = acf[0] + COVARIANCE_JITTER;
    let mut a: Vec<f64> = Vec::with_capacity(n);
    let mut next: Vec<f64> = Vec::with_capacity(n);
    let mut v = r0;
    for s in series.iter_mut() {
        s[0] *= v.sqrt();
    }
    for t in 1..n {
        if t <= MAX_ORDER {
            // a holds the order t-1 predictor: a[j-1] = a_{t-1,j}
            let mut num = acf[t];
            for (j, aj) in a.iter().enumerate() {
                num -= aj * acf[t - 1 - j];
            }
            let k = num / v;
            if !k.is_finite() || k.abs() >= 1.0 {
                return Err(Error::Numerical(format!(
                    "temporal covariance is not positive definite at order {t} (reflection {k})"
                )));
            }
            next.clear();
            for j in 0..a.len() {
                next.push(a[j] - k * a[a.len() - 1 - j]);
            }
            next.push(k);
            std::mem::swap(&mut a, &mut next);
            v *= 1.0 - k * k;
            if v <= 0.0 {
                return Err(Error::Numerical(format!(
                    "innovation variance vanished at order {t}"
                )));
            }
        }
        let sd = v.sqrt();
        for s in series.iter_mut() {
            let mut pred = Complex64::new(0.0, 0.0);
            for (j, aj) in a.iter().enumerate() {
                pred += s[t - 1 - j] * *aj;
            }
            s[t] = pred + s[t] * sd;
        }
    }
    Ok(())
}
