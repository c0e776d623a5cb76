#![allow(dead_code)]

pub mod gradcases;
pub mod oracles;

use csiauth::tensor::{Tape, Tensor, Var};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand::SeedableRng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_tensor(rng: &mut impl Rng, rows: usize, cols: usize) -> Tensor {
    Tensor::from_fn(rows, cols, |_, _| rng.random_range(-1.0..1.0))
}

/// `‖a − b‖ / max(‖a‖, ‖b‖)`, zero when both vanish.
pub fn rel_err(a: &[f64], b: &[f64]) -> f64 {
    let diff: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt();
    let na: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb: f64 = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    let scale = na.max(nb);
    if scale == 0.0 {
        0.0
    } else {
        diff / scale
    }
}

/// Compares tape gradients of `Σ probe ⊙ f(inputs)` with central differences
/// (step 1e-6) for every input; returns the worst relative error.
pub fn check_op(
    inputs: &[Tensor],
    probe_seed: u64,
    f: impl Fn(&mut Tape, &[Var]) -> Var,
) -> f64 {
    let eval = |vals: &[Tensor]| -> f64 {
        let mut tape = Tape::new();
        let vars: Vec<Var> = vals.iter().map(|t| tape.constant(t.clone())).collect();
        let out = f(&mut tape, &vars);
        let o = tape.value(out);
        let mut r = rng(probe_seed);
        o.data().iter().map(|v| v * r.random_range(-1.0..1.0)).sum()
    };

    let mut tape = Tape::new();
    let vars: Vec<Var> = inputs.iter().map(|t| tape.param(t.clone())).collect();
    let out = f(&mut tape, &vars);
    let shape = tape.value(out).shape().to_vec();
    let mut r = rng(probe_seed);
    let probe = Tensor::new(
        &shape,
        (0..shape.iter().product::<usize>()).map(|_| r.random_range(-1.0..1.0)).collect(),
    )
    .unwrap();
    let p = tape.constant(probe);
    let weighted = tape.mul(out, p).unwrap();
    let loss = tape.sum(weighted);
    let grads = tape.backward(loss).unwrap();

    let h = 1e-6;
    let mut worst: f64 = 0.0;
    for (i, v) in vars.iter().enumerate() {
        let analytic = grads.get(*v).unwrap().data().to_vec();
        let mut numeric = vec![0.0; analytic.len()];
        for (e, n) in numeric.iter_mut().enumerate() {
            let mut plus = inputs.to_vec();
            plus[i].data_mut()[e] += h;
            let mut minus = inputs.to_vec();
            minus[i].data_mut()[e] -= h;
            *n = (eval(&plus) - eval(&minus)) / (2.0 * h);
        }
        worst = worst.max(rel_err(&analytic, &numeric));
    }
    worst
}

/// Ensemble second-order statistics of one tap: `n_real` independent
/// realizations of length `max_lag + 1`. Returns the mean power at time 0 and
/// the normalized autocorrelation `Re E[h_0* h_m] / E|h_0|²` for `m = 1..=max_lag`.
pub fn ensemble_stats(
    process: &csiauth::channel::FadingProcess,
    tap: usize,
    n_real: usize,
    max_lag: usize,
    seed: u64,
) -> (f64, Vec<f64>) {
    let mut power = 0.0;
    let mut cross = vec![0.0; max_lag];
    for i in 0..n_real {
        let seq = csiauth::channel::gen_tap_sequence(process, max_lag + 1, seed.wrapping_add(i as u64)).unwrap();
        let h = seq.tap_series(tap);
        power += h[0].norm_sqr();
        for m in 1..=max_lag {
            cross[m - 1] += (h[0].conj() * h[m]).re;
        }
    }
    (
        power / n_real as f64,
        cross.iter().map(|c| c / power).collect(),
    )
}
