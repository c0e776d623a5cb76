//! Independent reference implementations used as test oracles.

use csiauth::channel::{simulate_link, CsiVector, ScenarioConfig};
use csiauth::experiments::GroundTruth;
use csiauth::model::{Attention, ModelConfig};
use csiauth::tensor::Tensor;

pub const N_P: usize = 20;
pub const N_F: usize = 5;

/// Two-block model used by the attention and layer tests.
pub fn small_config(n_layers: usize) -> ModelConfig {
    ModelConfig {
        d_model: 8,
        n_head: 2,
        n_layers,
        d_ff: 12,
        n_p: 5,
        n_f: 2,
        input_dim: 6,
    }
}

/// Explicit-loop attention: per head, scores, masked softmax, weighted sum,
/// then the output projection.
pub fn attention_oracle(
    attn: &Attention<Tensor>,
    n_head: usize,
    q: &Tensor,
    k: &Tensor,
    v: &Tensor,
    causal: bool,
) -> Vec<Vec<f64>> {
    let d_m = q.cols();
    let d_k = d_m / n_head;
    let proj = |x: &Tensor, w: &Tensor, r: usize, c: usize| -> f64 {
        (0..d_m).map(|i| x.get(r, i) * w.get(i, c)).sum()
    };
    let (nq, nk) = (q.rows(), k.rows());
    let mut concat = vec![vec![0.0; d_m]; nq];
    for h in 0..n_head {
        for i in 0..nq {
            let mut scores = Vec::new();
            for j in 0..nk {
                if causal && j > i {
                    continue;
                }
                let mut s = 0.0;
                for c in h * d_k..(h + 1) * d_k {
                    s += proj(q, &attn.wq, i, c) * proj(k, &attn.wk, j, c);
                }
                scores.push((j, s / (d_k as f64).sqrt()));
            }
            let max = scores.iter().map(|s| s.1).fold(f64::NEG_INFINITY, f64::max);
            let z: f64 = scores.iter().map(|s| (s.1 - max).exp()).sum();
            for c in h * d_k..(h + 1) * d_k {
                concat[i][c] = scores
                    .iter()
                    .map(|&(j, s)| (s - max).exp() / z * proj(v, &attn.wv, j, c))
                    .sum();
            }
        }
    }
    (0..nq)
        .map(|i| {
            (0..d_m)
                .map(|c| (0..d_m).map(|m| concat[i][m] * attn.wo.get(m, c)).sum())
                .collect()
        })
        .collect()
}

/// Direct power series, summed until terms vanish.
pub fn j0_series(x: f64) -> f64 {
    let (mut term, mut sum) = (1.0f64, 1.0f64);
    for k in 1..200 {
        term *= -(x * x / 4.0) / (k as f64 * k as f64);
        sum += term;
        if term.abs() < 1e-18 {
            break;
        }
    }
    sum
}

/// Scans the decay ratio on a fine grid and keeps the profile whose discrete
/// RMS delay is closest to `trms`.
pub fn scan_pdp(trms: f64, spacing: f64) -> (f64, usize) {
    let mut best = (f64::INFINITY, 0.0, 0);
    for i in 1..100_000 {
        let r = i as f64 / 100_000.0;
        let mut taps = 1;
        while r.powi(taps as i32) > 1e-3 {
            taps += 1;
        }
        let p: Vec<f64> = (0..taps).map(|l| r.powi(l as i32)).collect();
        let s: f64 = p.iter().sum();
        let m1: f64 = p.iter().enumerate().map(|(l, v)| v * l as f64 * spacing).sum::<f64>() / s;
        let m2: f64 = p.iter().enumerate().map(|(l, v)| v * (l as f64 * spacing).powi(2)).sum::<f64>() / s;
        let err = ((m2 - m1 * m1).sqrt() - trms).abs();
        if err < best.0 {
            best = (err, r, taps);
        }
    }
    (best.1, best.2)
}

/// Noiseless link: Bob's trajectory and a spoofer 24 cm away.
pub fn link(len: usize, seed: u64) -> (Vec<CsiVector>, Vec<CsiVector>) {
    let cfg = ScenarioConfig {
        snr_db: f64::INFINITY,
        sequence_length: len,
        seed,
        ..ScenarioConfig::default()
    };
    let l = simulate_link(&cfg).unwrap();
    (l.bob_csi, l.mallory_csi)
}

/// History, received stream with `n_a` spoofed packets, and a stub that
/// knows Bob's trajectory.
pub fn scenario(n_a: usize, n_rx: usize, seed: u64) -> (Vec<CsiVector>, Vec<CsiVector>, GroundTruth) {
    let (bob, mal) = link(N_P + n_rx, seed);
    let mut rx = mal[N_P..N_P + n_a].to_vec();
    rx.extend_from_slice(&bob[N_P + n_a..]);
    let stub = GroundTruth::new(N_P, N_F, vec![bob.clone()]);
    (bob[..N_P].to_vec(), rx, stub)
}

/// Two-pass sample correlation.
pub fn pearson_two_pass(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let cov: f64 = a.iter().zip(b).map(|(x, y)| (x - ma) * (y - mb)).sum();
    let va: f64 = a.iter().map(|x| (x - ma).powi(2)).sum();
    let vb: f64 = b.iter().map(|y| (y - mb).powi(2)).sum();
    cov / (va * vb).sqrt()
}
