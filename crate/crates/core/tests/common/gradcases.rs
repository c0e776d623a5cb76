//! Finite-difference gradient checks shared by the gradcheck tests and the
//! acceptance suite.

use csiauth::model::{minibatch_loss_and_grads, FlatRecords, ModelConfig, ModelParams, RecordShape};
use csiauth::tensor::{Tensor, MASKED};
use rand::Rng;

use super::{check_op, random_tensor, rel_err, rng};

pub const INSTANCES: u64 = 10;
pub const PRIMITIVE_TOL: f64 = 1e-5;
pub const MODEL_TOL: f64 = 1e-4;

fn dims(r: &mut impl Rng) -> (usize, usize, usize) {
    (r.random_range(1..5), r.random_range(2..6), r.random_range(1..5))
}

/// Random matrix with no entry within 0.05 of zero.
fn away_from_zero(r: &mut impl Rng, rows: usize, cols: usize) -> Tensor {
    Tensor::from_fn(rows, cols, |_, _| {
        let m: f64 = r.random_range(0.05..1.0);
        if r.random_bool(0.5) {
            m
        } else {
            -m
        }
    })
}

pub fn matmul(s: u64) -> f64 {
    let mut r = rng(s);
    let (m, k, n) = dims(&mut r);
    let a = random_tensor(&mut r, m, k);
    let b = random_tensor(&mut r, k, n);
    check_op(&[a, b], s, |t, v| t.matmul(v[0], v[1]).unwrap())
}

pub fn add_sub_mul(s: u64) -> f64 {
    let mut r = rng(100 + s);
    let (m, n, _) = dims(&mut r);
    let a = random_tensor(&mut r, m, n);
    let b = random_tensor(&mut r, m, n);
    let c = random_tensor(&mut r, m, n);
    check_op(&[a, b, c], s, |t, v| {
        let x = t.add(v[0], v[1]).unwrap();
        let y = t.sub(x, v[2]).unwrap();
        t.mul(y, v[0]).unwrap()
    })
}

pub fn add_row_scale(s: u64) -> f64 {
    let mut r = rng(200 + s);
    let (m, n, _) = dims(&mut r);
    let a = random_tensor(&mut r, m, n);
    let b = random_tensor(&mut r, 1, n).reshape(&[n]).unwrap();
    check_op(&[a, b], s, |t, v| {
        let x = t.add_row(v[0], v[1]).unwrap();
        t.scale(x, -1.7)
    })
}

pub fn transpose(s: u64) -> f64 {
    let mut r = rng(300 + s);
    let (m, n, _) = dims(&mut r);
    check_op(&[random_tensor(&mut r, m, n)], s, |t, v| t.transpose(v[0]).unwrap())
}

pub fn relu(s: u64) -> f64 {
    let mut r = rng(400 + s);
    let (m, n, _) = dims(&mut r);
    check_op(&[away_from_zero(&mut r, m, n)], s, |t, v| t.relu(v[0]))
}

pub fn softmax(s: u64) -> f64 {
    let mut r = rng(500 + s);
    let (m, n, _) = dims(&mut r);
    let x = random_tensor(&mut r, m, n).map(|v| 3.0 * v);
    check_op(&[x], s, |t, v| t.softmax_masked(v[0], None).unwrap())
}

pub fn softmax_masked(s: u64) -> f64 {
    let mut r = rng(600 + s);
    let (m, n, _) = dims(&mut r);
    let x = random_tensor(&mut r, m, n);
    // keep column 0 open so no row is fully masked
    let mask = Tensor::from_fn(m, n, |_, c| {
        if c > 0 && r.random_bool(0.4) {
            MASKED
        } else {
            0.0
        }
    });
    check_op(&[x], s, move |t, v| t.softmax_masked(v[0], Some(&mask)).unwrap())
}

pub fn layer_norm(s: u64) -> f64 {
    let mut r = rng(700 + s);
    let (m, _, _) = dims(&mut r);
    let n = r.random_range(2..9);
    let x = random_tensor(&mut r, m, n);
    let g = random_tensor(&mut r, 1, n).reshape(&[n]).unwrap();
    let b = random_tensor(&mut r, 1, n).reshape(&[n]).unwrap();
    check_op(&[x, g, b], s, |t, v| t.layer_norm(v[0], v[1], v[2]).unwrap())
}

pub fn concat_slice(s: u64) -> f64 {
    let mut r = rng(800 + s);
    let (m, n, k) = dims(&mut r);
    let a = random_tensor(&mut r, m + 1, n);
    let b = random_tensor(&mut r, m + 1, k);
    check_op(&[a, b], s, |t, v| {
        let c = t.concat_cols(&[v[0], v[1], v[0]]).unwrap();
        let w = t.value(c).cols();
        let x = t.slice_cols(c, 1, w - 1).unwrap();
        t.slice_rows(x, 1, t.value(x).rows()).unwrap()
    })
}

pub fn gather_rows(s: u64) -> f64 {
    let mut r = rng(900 + s);
    let (m, n, _) = dims(&mut r);
    let idx: Vec<usize> = (0..m + 3).map(|_| r.random_range(0..m)).collect();
    check_op(&[random_tensor(&mut r, m, n)], s, move |t, v| {
        t.gather_rows(v[0], idx.clone()).unwrap()
    })
}

pub fn block_matmul_nt(s: u64) -> f64 {
    let mut r = rng(1000 + s);
    let (blocks, d, ar) = dims(&mut r);
    let br = r.random_range(1..4);
    let a = random_tensor(&mut r, blocks * ar, d);
    let b = random_tensor(&mut r, blocks * br, d);
    check_op(&[a, b], s, |t, v| t.block_matmul_nt(v[0], v[1], ar, br).unwrap())
}

pub fn block_matmul(s: u64) -> f64 {
    let mut r = rng(1100 + s);
    let (blocks, d, ar) = dims(&mut r);
    let br = r.random_range(1..4);
    let a = random_tensor(&mut r, blocks * ar, br);
    let b = random_tensor(&mut r, blocks * br, d);
    check_op(&[a, b], s, |t, v| t.block_matmul(v[0], v[1], ar, br).unwrap())
}

pub fn sum(s: u64) -> f64 {
    let mut r = rng(1200 + s);
    let (m, n, _) = dims(&mut r);
    check_op(&[random_tensor(&mut r, m, n)], s, |t, v| t.sum(v[0]))
}

pub fn weighted_sum_squares(s: u64) -> f64 {
    let mut r = rng(1300 + s);
    let (m, n, _) = dims(&mut r);
    let w: Vec<f64> = (0..m).map(|_| r.random_range(0.1..2.0)).collect();
    check_op(&[random_tensor(&mut r, m, n)], s, move |t, v| {
        t.weighted_sum_squares(v[0], w.clone()).unwrap()
    })
}

/// Every differentiable primitive with the case that exercises it.
pub const PRIMITIVES: &[(&str, fn(u64) -> f64)] = &[
    ("matmul", matmul),
    ("add/sub/mul", add_sub_mul),
    ("add_row/scale", add_row_scale),
    ("transpose", transpose),
    ("relu", relu),
    ("softmax", softmax),
    ("softmax masked", softmax_masked),
    ("layer_norm", layer_norm),
    ("concat/slice", concat_slice),
    ("gather_rows", gather_rows),
    ("block_matmul_nt", block_matmul_nt),
    ("block_matmul", block_matmul),
    ("sum", sum),
    ("weighted_sum_squares", weighted_sum_squares),
];

/// Every weight of a tiny model against central differences of the
/// minibatch NMSE.
pub fn model_gradient_error(seed: u64) -> f64 {
    let config = ModelConfig {
        d_model: 8,
        n_head: 2,
        n_layers: 2,
        d_ff: 12,
        n_p: 4,
        n_f: 2,
        input_dim: 6,
    };
    let mut r = rng(5000 + seed);
    let params = ModelParams::init(config, seed).unwrap();
    let shape = RecordShape { dim: 6, n_p: 4, n_f: 2 };
    let mut records = FlatRecords::new(shape);
    for _ in 0..3 {
        let input: Vec<f64> = (0..24).map(|_| r.random_range(-1.0..1.0)).collect();
        let target: Vec<f64> = (0..12).map(|_| r.random_range(-1.0..1.0)).collect();
        records.push(&input, &target).unwrap();
    }
    let idx = [0, 1, 2];
    let (_, grads) = minibatch_loss_and_grads(&params, &records, &idx).unwrap();
    let analytic = grads.leaves();
    let h = 1e-6;
    let mut worst: f64 = 0.0;
    for (li, g) in analytic.iter().enumerate() {
        let mut numeric = vec![0.0; g.len()];
        for (e, n) in numeric.iter_mut().enumerate() {
            let loss_at = |delta: f64| {
                let mut p = params.clone();
                p.weights.leaves_mut()[li].data_mut()[e] += delta;
                minibatch_loss_and_grads(&p, &records, &idx).unwrap().0
            };
            *n = (loss_at(h) - loss_at(-h)) / (2.0 * h);
        }
        worst = worst.max(rel_err(g.data(), &numeric));
    }
    worst
}
