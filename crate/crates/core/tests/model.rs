mod common;

use common::oracles::{attention_oracle, small_config};
use common::{random_tensor, rng};
use csiauth::channel::CsiVector;
use csiauth::model::*;
use csiauth::tensor::{Tensor, LAYER_NORM_EPS};
use rand::Rng;

fn random_window(r: &mut impl Rng, n: usize, dim: usize) -> Vec<CsiVector> {
    (0..n)
        .map(|_| CsiVector::new((0..dim).map(|_| r.random_range(-1.0..1.0)).collect()).unwrap())
        .collect()
}

#[test]
fn attention_matches_direct_formula() {
    for seed in 0..20 {
        let params = ModelParams::init(small_config(1), seed).unwrap();
        let mut r = rng(seed);
        let attn = &params.weights.decoder[0].cross_attn;
        let q = random_tensor(&mut r, 5, 8);
        let kv = random_tensor(&mut r, 5, 8);
        for causal in [false, true] {
            let got = multi_head_attention(&params, attn, &q, &kv, &kv, causal).unwrap();
            let want = attention_oracle(attn, 2, &q, &kv, &kv, causal);
            for (i, row) in want.iter().enumerate() {
                for (c, w) in row.iter().enumerate() {
                    assert!((got.get(i, c) - w).abs() < 1e-10, "seed {seed} ({i},{c})");
                }
            }
        }
    }
}

#[test]
fn zero_query_key_gives_row_mean() {
    let config = ModelConfig {
        n_head: 1,
        ..small_config(1)
    };
    let params = ModelParams::init(config, 0).unwrap();
    let attn = Attention {
        wq: Tensor::zeros(&[8, 8]),
        wk: Tensor::zeros(&[8, 8]),
        wv: Tensor::eye(8),
        wo: Tensor::eye(8),
    };
    let mut r = rng(1);
    let v = random_tensor(&mut r, 5, 8);
    let out = multi_head_attention(&params, &attn, &v, &v, &v, false).unwrap();
    for c in 0..8 {
        let mean = (0..5).map(|j| v.get(j, c)).sum::<f64>() / 5.0;
        for i in 0..5 {
            assert!((out.get(i, c) - mean).abs() < 1e-14);
        }
    }
}

#[test]
fn masked_self_attention_is_causal() {
    let params = ModelParams::init(small_config(2), 3).unwrap();
    let attn = &params.weights.decoder[1].self_attn;
    let mut r = rng(4);
    let s = random_tensor(&mut r, 5, 8);
    let base = multi_head_attention(&params, attn, &s, &s, &s, true).unwrap();
    for i in 0..5 {
        let mut p = s.clone();
        for row in i + 1..5 {
            for c in 0..8 {
                p.set(row, c, p.get(row, c) + r.random_range(-3.0..3.0));
            }
        }
        let out = multi_head_attention(&params, attn, &p, &p, &p, true).unwrap();
        for row in 0..=i {
            for c in 0..8 {
                assert!((out.get(row, c) - base.get(row, c)).abs() <= 1e-12);
            }
        }
        if i < 4 {
            assert!((out.get(4, 0) - base.get(4, 0)).abs() > 1e-9);
        }
    }
}

fn layer_norm(x: &[f64], norm: &Norm<Tensor>) -> Vec<f64> {
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    let var = x.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    let inv = 1.0 / (var + LAYER_NORM_EPS).sqrt();
    x.iter()
        .enumerate()
        .map(|(c, v)| (v - mean) * inv * norm.gain.data()[c] + norm.bias.data()[c])
        .collect()
}

fn add_norm(x: &Tensor, sub: &[Vec<f64>], norm: &Norm<Tensor>) -> Tensor {
    let rows: Vec<f64> = (0..x.rows())
        .flat_map(|r| {
            let s: Vec<f64> = x.row(r).iter().zip(&sub[r]).map(|(a, b)| a + b).collect();
            layer_norm(&s, norm)
        })
        .collect();
    Tensor::new(&[x.rows(), x.cols()], rows).unwrap()
}

fn ffn(x: &Tensor, f: &FeedForward<Tensor>) -> Vec<Vec<f64>> {
    (0..x.rows())
        .map(|r| {
            let h: Vec<f64> = (0..f.w1.cols())
                .map(|j| {
                    let v: f64 = (0..x.cols()).map(|i| x.get(r, i) * f.w1.get(i, j)).sum();
                    (v + f.b1.data()[j]).max(0.0)
                })
                .collect();
            (0..f.w2.cols())
                .map(|c| (0..h.len()).map(|j| h[j] * f.w2.get(j, c)).sum::<f64>() + f.b2.data()[c])
                .collect()
        })
        .collect()
}

fn rows(t: &Tensor) -> Vec<Vec<f64>> {
    (0..t.rows()).map(|r| t.row(r).to_vec()).collect()
}

fn randomized(config: ModelConfig, seed: u64) -> ModelParams {
    // Non-trivial gains and biases so the oracle exercises every term.
    let mut p = ModelParams::init(config, seed).unwrap();
    let mut r = rng(seed + 77);
    for t in p.weights.leaves_mut() {
        for v in t.data_mut() {
            *v += r.random_range(-0.2..0.2);
        }
    }
    p
}

#[test]
fn encoder_layer_matches_composition() {
    let params = randomized(small_config(1), 5);
    let l = &params.weights.encoder[0];
    let mut r = rng(6);
    let s = random_tensor(&mut r, 5, 8);
    let a = multi_head_attention(&params, &l.attn, &s, &s, &s, false).unwrap();
    let z = add_norm(&s, &rows(&a), &l.norm1);
    let want = add_norm(&z, &ffn(&z, &l.ffn), &l.norm2);
    let got = encoder_forward(&params, &s).unwrap();
    assert!(got.max_abs_diff(&want) < 1e-12, "{}", got.max_abs_diff(&want));
}

#[test]
fn decoder_layer_matches_composition() {
    let params = randomized(small_config(1), 8);
    let l = &params.weights.decoder[0];
    let mut r = rng(9);
    let s = random_tensor(&mut r, 5, 8);
    let e = random_tensor(&mut r, 5, 8);
    let a = multi_head_attention(&params, &l.self_attn, &s, &s, &s, true).unwrap();
    let zd = add_norm(&s, &rows(&a), &l.norm1);
    let c = multi_head_attention(&params, &l.cross_attn, &zd, &e, &e, false).unwrap();
    let zc = add_norm(&zd, &rows(&c), &l.norm2);
    let o = add_norm(&zc, &ffn(&zc, &l.ffn), &l.norm3);
    let head = o
        .matmul(&params.weights.head_w)
        .unwrap()
        .zip_map(
            &Tensor::from_fn(5, 6, |_, c| params.weights.head_b.data()[c]),
            |a, b| a + b,
        )
        .unwrap();
    let got = decoder_forward(&params, &s, &e).unwrap();
    assert!(got.max_abs_diff(&head) < 1e-12, "{}", got.max_abs_diff(&head));
}

#[test]
fn zero_weights_reduce_to_double_norm() {
    let config = small_config(1);
    let params = ModelParams {
        config,
        weights: Weights::zeros(&config),
    };
    let mut r = rng(10);
    let s = random_tensor(&mut r, 5, 8);
    let unit = Norm {
        gain: Tensor::ones(&[8]),
        bias: Tensor::zeros(&[8]),
    };
    let zero = vec![vec![0.0; 8]; 5];
    let want = add_norm(&add_norm(&s, &zero, &unit), &zero, &unit);
    assert!(encoder_forward(&params, &s).unwrap().max_abs_diff(&want) < 1e-12);
}

#[test]
fn cross_attention_depends_on_encoder() {
    let params = randomized(small_config(2), 11);
    let mut r = rng(12);
    let s = random_tensor(&mut r, 5, 8);
    let e = random_tensor(&mut r, 5, 8);
    let mut e2 = e.clone();
    e2.set(2, 3, e2.get(2, 3) + 1.0);
    let a = decoder_forward(&params, &s, &e).unwrap();
    let b = decoder_forward(&params, &s, &e2).unwrap();
    for row in 0..5 {
        assert!(a.row(row).iter().zip(b.row(row)).any(|(x, y)| (x - y).abs() > 1e-9));
    }
}

#[test]
fn encoder_input_of_zero_window_is_positional_encoding() {
    let params = ModelParams::init(ModelConfig::default(), 0).unwrap();
    let zero = vec![CsiVector::zeros(104); 20];
    let pe = positional_encoding(20, 64);
    let s_e = build_encoder_input(&params, &zero).unwrap();
    assert_eq!(s_e.shape(), &[20, 64]);
    assert_eq!(s_e, pe);
    assert_eq!(build_decoder_input(&params, &zero).unwrap(), pe);
    assert!(pe.data().iter().all(|v| (-1.0..=1.0).contains(v)));
    assert!(build_encoder_input(&params, &zero[1..]).is_err());
}

#[test]
fn decoder_sequence_layout() {
    let mut r = rng(13);
    let w = random_window(&mut r, 20, 4);
    let d = decoder_input_sequence(&w, 5).unwrap();
    assert_eq!(d.len(), 20);
    assert_eq!(&d[..15], &w[5..]);
    assert!(d[15..].iter().all(|v| v.energy() == 0.0));
    let one = decoder_input_sequence(&w, 19).unwrap();
    assert_eq!(one[0], w[19]);
    assert!(one[1..].iter().all(|v| v.energy() == 0.0));
}

#[test]
fn causal_mask_shape() {
    assert_eq!(causal_mask(1).data(), &[0.0]);
    let m = causal_mask(3);
    let inf = f64::NEG_INFINITY;
    assert_eq!(m.data(), &[0.0, inf, inf, 0.0, 0.0, inf, 0.0, 0.0, 0.0]);
}

#[test]
fn select_takes_last_rows() {
    let o = Tensor::from_fn(20, 4, |r, c| (r * 4 + c) as f64);
    let sel = select_predictions(&o, 5).unwrap();
    assert_eq!(sel.len(), 5);
    assert_eq!(sel[0].as_slice(), o.row(15));
    assert_eq!(sel[4].as_slice(), o.row(19));
    assert_eq!(select_predictions(&o, 19).unwrap()[0].as_slice(), o.row(1));
}

#[test]
fn predict_shape_determinism_and_order_sensitivity() {
    let params = ModelParams::init(ModelConfig::default(), 21).unwrap();
    let mut r = rng(22);
    let w = random_window(&mut r, 20, 104);
    let a = predict(&params, &w).unwrap();
    assert_eq!(a.len(), 5);
    assert!(a.iter().all(|v| v.len() == 104 && v.as_slice().iter().all(|x| x.is_finite())));
    assert_eq!(a, predict(&params, &w).unwrap());
    let mut swapped = w.clone();
    swapped.swap(3, 11);
    assert_ne!(a, predict(&params, &swapped).unwrap());
}

#[test]
fn batched_prediction_equals_single() {
    let params = randomized(small_config(2), 30);
    let mut r = rng(31);
    let ws: Vec<Vec<CsiVector>> = (0..4).map(|_| random_window(&mut r, 5, 6)).collect();
    let refs: Vec<&[CsiVector]> = ws.iter().map(Vec::as_slice).collect();
    let batch = predict_batch(&params, &refs).unwrap();
    for (w, b) in ws.iter().zip(&batch) {
        let single = predict(&params, w).unwrap();
        for (x, y) in single.iter().zip(b) {
            for (p, q) in x.as_slice().iter().zip(y.as_slice()) {
                assert!((p - q).abs() < 1e-12);
            }
        }
    }
}

#[test]
fn checkpoint_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let params = randomized(small_config(2), 40);
    let a = dir.path().join("a.cptx");
    let b = dir.path().join("b.cptx");
    save_checkpoint(&params, &a).unwrap();
    let loaded = load_checkpoint(&a).unwrap();
    assert_eq!(loaded, params);
    save_checkpoint(&loaded, &b).unwrap();
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    let mut r = rng(41);
    let w = random_window(&mut r, 5, 6);
    assert_eq!(predict(&params, &w).unwrap(), predict(&loaded, &w).unwrap());

    let mut bytes = std::fs::read(&a).unwrap();
    bytes[0] = b'X';
    std::fs::write(&b, &bytes).unwrap();
    assert!(load_checkpoint(&b).unwrap_err().to_string().contains("magic"));
    let mut bytes = std::fs::read(&a).unwrap();
    bytes[4] = 9;
    std::fs::write(&b, &bytes).unwrap();
    assert!(load_checkpoint(&b).unwrap_err().to_string().contains("version"));
    let bytes = std::fs::read(&a).unwrap();
    std::fs::write(&b, &bytes[..bytes.len() - 8]).unwrap();
    assert!(load_checkpoint(&b).is_err());
    assert!(load_checkpoint(&dir.path().join("missing")).is_err());
}

fn memorize_set(n: usize) -> FlatRecords {
    let mut r = rng(50);
    let mut recs = FlatRecords::new(RecordShape { dim: 6, n_p: 5, n_f: 2 });
    for _ in 0..n {
        let input: Vec<f64> = (0..30).map(|_| r.random_range(-1.0..1.0)).collect();
        let target: Vec<f64> = (0..12).map(|_| r.random_range(-1.0..1.0)).collect();
        recs.push(&input, &target).unwrap();
    }
    recs
}

#[test]
fn overfits_ten_records() {
    let recs = memorize_set(10);
    let config = ModelConfig {
        d_model: 16,
        n_head: 2,
        d_ff: 32,
        ..small_config(2)
    };
    let mut trainer = Trainer::new(ModelParams::init(config, 1).unwrap(), 3e-3);
    let idx: Vec<usize> = (0..10).collect();
    let mut loss = f64::INFINITY;
    for _ in 0..2000 {
        loss = trainer.step(&recs, &idx).unwrap();
    }
    assert!(loss < 1e-3, "final train nmse {loss}");
}

#[test]
fn training_improves_validation_and_reports_every_epoch() {
    let recs = memorize_set(60);
    let hyper = TrainConfig {
        batch_size: 8,
        max_epochs: 5,
        seed: 3,
        ..TrainConfig::default()
    };
    let mut seen = 0;
    let out = train(&recs, small_config(2), &hyper, |s| {
        seen += 1;
        assert!(s.train_nmse.is_finite() && s.val_nmse.is_finite());
    })
    .unwrap();
    assert_eq!(seen, out.history.len());
    assert!(out.history.iter().map(|s| s.val_nmse).fold(f64::INFINITY, f64::min) < out.initial_val_nmse);
    assert!(train(&FlatRecords::new(recs.shape()), small_config(2), &hyper, |_| {}).is_err());
    let wrong = ModelConfig { n_f: 1, ..small_config(2) };
    assert!(train(&recs, wrong, &hyper, |_| {}).is_err());
}

#[test]
fn validation_split_partitions() {
    let (train, val) = validation_split(1000, 7);
    assert_eq!(train.len() + val.len(), 1000);
    assert!((60..140).contains(&val.len()));
    let mut all: Vec<usize> = train.iter().chain(&val).copied().collect();
    all.sort();
    assert_eq!(all, (0..1000).collect::<Vec<_>>());
    assert_eq!(validation_split(1000, 7), (train, val));
}

#[test]
fn nmse_identities() {
    let mut r = rng(60);
    let t = random_window(&mut r, 3, 8);
    let zero = vec![CsiVector::zeros(8); 3];
    let twice: Vec<CsiVector> = t
        .iter()
        .map(|v| CsiVector::new(v.as_slice().iter().map(|x| 2.0 * x).collect()).unwrap())
        .collect();
    assert!(nmse_loss(&t, &t).unwrap().abs() <= 1e-12);
    assert!((nmse_loss(&zero, &t).unwrap() - 1.0).abs() <= 1e-12);
    assert!((nmse_loss(&twice, &t).unwrap() - 1.0).abs() <= 1e-12);
}
