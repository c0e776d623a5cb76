//! Time-varying multipath channels and CSI measurements.
//!
//! A [`ScenarioConfig`] fixes the delay spread, terminal speed, packet spacing,
//! SNR and spoofer distance. From it, [`simulate_link`] draws Bob's and
//! Mallory's tap trajectories and turns each snapshot into a noisy realified
//! [`CsiVector`].

mod bessel;
mod csi;
mod ofdm;
mod pdp;
mod scenario;
mod taps;

pub use bessel::j0;
pub use csi::{csi_realify, CsiVector};
pub use ofdm::{
    active_subcarriers, add_estimation_noise, cfr_from_taps, CfrMeasurement, NUM_ACTIVE,
    NUM_SUBCARRIERS,
};
pub use pdp::{make_pdp, PdpProfile, ENERGY_CAPTURE, RMS_TOLERANCE};
pub use scenario::{measure, simulate_bob, simulate_link, Link, ScenarioConfig};
pub use taps::{
    doppler_freq, gen_attacker_sequence, gen_tap_sequence, spatial_correlation, ChannelSnapshot,
    FadingProcess, TapSequence, COVARIANCE_JITTER, MAX_ORDER, SPEED_OF_LIGHT,
};
