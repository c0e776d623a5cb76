use rayon::prelude::*;

use crate::channel::{simulate_link, CsiVector, ScenarioConfig};
use crate::error::{invalid, Result};
use crate::seed::{self, tag};

/// Legitimate packets that follow the attack in every generated sequence.
pub const POST_ATTACK_PACKETS: usize = 30;

/// One authentication scenario: a trusted history, then `n_a` spoofed
/// packets, then legitimate ones.
#[derive(Clone, Debug, PartialEq)]
pub struct TestSequence {
    pub h_hist: Vec<CsiVector>,
    /// Received stream to authenticate.
    pub h_rx: Vec<CsiVector>,
    pub n_a: usize,
    /// `false` for spoofed packets.
    pub ground_truth: Vec<bool>,
    /// Bob's own measurements at every received position, including those
    /// hidden by the attack.
    pub legit: Vec<CsiVector>,
}

/// `count` sequences for every attack length in `n_a_values`.
///
/// Sequence `c` at attack length `n_a` simulates `cfg` with its seed replaced
/// by a value derived from `(cfg.seed, n_a, c)` and length
/// `n_p + n_a + post_attack`. Bob's trajectory runs uninterrupted; the
/// spoofer's CSI replaces it on the first `n_a` received packets.
pub fn build_test_sequences(
    cfg: &ScenarioConfig,
    n_p: usize,
    n_a_values: &[usize],
    count: usize,
    post_attack: usize,
) -> Result<Vec<TestSequence>> {
    if n_p == 0 {
        return Err(invalid!("history length must be positive"));
    }
    let jobs: Vec<(usize, usize)> = n_a_values
        .iter()
        .flat_map(|&n_a| (0..count).map(move |c| (n_a, c)))
        .collect();
    jobs.par_iter()
        .map(|&(n_a, c)| {
            let scenario = ScenarioConfig {
                seed: seed::derive(cfg.seed, &[tag::TEST, n_a as u64, c as u64]),
                sequence_length: n_p + n_a + post_attack,
                ..cfg.clone()
            };
            let link = simulate_link(&scenario)?;
            let mut bob = link.bob_csi;
            let legit = bob.split_off(n_p);
            let mut h_rx = link.mallory_csi[n_p..n_p + n_a].to_vec();
            h_rx.extend_from_slice(&legit[n_a..]);
            Ok(TestSequence {
                h_hist: bob,
                h_rx,
                n_a,
                ground_truth: (0..n_a + post_attack).map(|k| k >= n_a).collect(),
                legit,
            })
        })
        .collect()
}
