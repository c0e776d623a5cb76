use super::csi::{csi_realify, CsiVector};
use super::ofdm::{add_estimation_noise, cfr_from_taps, NUM_ACTIVE, NUM_SUBCARRIERS};
use super::pdp::{make_pdp, PdpProfile};
use super::taps::{doppler_freq, gen_attacker_sequence, gen_tap_sequence, FadingProcess, TapSequence};
use crate::error::{invalid, Result};
use crate::seed::{self, tag};

/// Full generative description of one simulated link.
#[derive(Clone, Debug, PartialEq)]
pub struct ScenarioConfig {
    pub trms_ns: f64,
    pub snr_db: f64,
    pub v0_mps: f64,
    pub dt_ms: f64,
    pub d_bm_m: f64,
    pub fc_hz: f64,
    pub bandwidth_hz: f64,
    pub num_subcarriers: usize,
    pub num_active: usize,
    pub seed: u64,
    pub sequence_length: usize,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            trms_ns: 50.0,
            snr_db: 20.0,
            v0_mps: 1.0,
            dt_ms: 3.0,
            d_bm_m: 0.24,
            fc_hz: 2.4e9,
            bandwidth_hz: 20e6,
            num_subcarriers: NUM_SUBCARRIERS,
            num_active: NUM_ACTIVE,
            seed: 0,
            sequence_length: 100,
        }
    }
}

impl ScenarioConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("trms_ns", self.trms_ns),
            ("snr_db", self.snr_db),
            ("v0_mps", self.v0_mps),
            ("dt_ms", self.dt_ms),
            ("d_bm_m", self.d_bm_m),
            ("fc_hz", self.fc_hz),
            ("bandwidth_hz", self.bandwidth_hz),
        ];
        for (name, v) in positive {
            if !(v > 0.0) {
                return Err(invalid!("{name} must be strictly positive, got {v}"));
            }
        }
        if self.num_active == 0 || !self.num_active.is_multiple_of(2) {
            return Err(invalid!("num_active must be even and nonzero, got {}", self.num_active));
        }
        if self.num_active >= self.num_subcarriers {
            return Err(invalid!(
                "num_active ({}) must be below num_subcarriers ({})",
                self.num_active,
                self.num_subcarriers
            ));
        }
        if self.sequence_length == 0 {
            return Err(invalid!("sequence_length must be positive"));
        }
        Ok(())
    }

    /// Realified CSI dimension `2M′`.
    pub fn csi_dim(&self) -> usize {
        2 * self.num_active
    }

    /// `{-M′/2..-1, 1..M′/2}`; the 802.11n legacy set for `M′ = 52`.
    pub fn active_indices(&self) -> Vec<i32> {
        let h = (self.num_active / 2) as i32;
        (-h..=h).filter(|&m| m != 0).collect()
    }

    pub fn pdp(&self) -> Result<PdpProfile> {
        make_pdp(self.trms_ns, self.bandwidth_hz)
    }

    pub fn process(&self) -> Result<FadingProcess> {
        Ok(FadingProcess {
            pdp: self.pdp()?,
            doppler_hz: doppler_freq(self.v0_mps, self.fc_hz),
            dt_ms: self.dt_ms,
        })
    }
}

/// Legitimate and spoofer trajectories of one scenario, as taps and as noisy CSI.
#[derive(Clone, Debug)]
pub struct Link {
    pub bob_taps: TapSequence,
    pub mallory_taps: TapSequence,
    pub bob_csi: Vec<CsiVector>,
    pub mallory_csi: Vec<CsiVector>,
}

/// Noisy realified CSI of every snapshot in `seq`.
pub fn measure(seq: &TapSequence, cfg: &ScenarioConfig, noise_seed: u64) -> Result<Vec<CsiVector>> {
    let indices = cfg.active_indices();
    let mut rng = seed::rng(noise_seed);
    seq.snapshots
        .iter()
        .map(|s| {
            let clean = cfr_from_taps(s, cfg.num_subcarriers, &indices);
            Ok(csi_realify(&add_estimation_noise(&clean, cfg.snr_db, &mut rng)?))
        })
        .collect()
}

/// Simulates Bob's trajectory only (no spoofer draw).
pub fn simulate_bob(cfg: &ScenarioConfig) -> Result<(TapSequence, Vec<CsiVector>)> {
    cfg.validate()?;
    let taps = gen_tap_sequence(
        &cfg.process()?,
        cfg.sequence_length,
        seed::derive(cfg.seed, &[tag::BOB]),
    )?;
    let csi = measure(&taps, cfg, seed::derive(cfg.seed, &[tag::NOISE, tag::BOB]))?;
    Ok((taps, csi))
}

/// Simulates both transmitters. Bob's part is bit-identical to [`simulate_bob`]
/// with the same config.
pub fn simulate_link(cfg: &ScenarioConfig) -> Result<Link> {
    let (bob_taps, bob_csi) = simulate_bob(cfg)?;
    let mallory_taps = gen_attacker_sequence(
        &bob_taps,
        cfg.d_bm_m,
        cfg.fc_hz,
        seed::derive(cfg.seed, &[tag::MALLORY]),
    )?;
    let mallory_csi = measure(
        &mallory_taps,
        cfg,
        seed::derive(cfg.seed, &[tag::NOISE, tag::MALLORY]),
    )?;
    Ok(Link {
        bob_taps,
        mallory_taps,
        bob_csi,
        mallory_csi,
    })
}
