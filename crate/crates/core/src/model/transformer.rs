//! Forward pass of the encoder-decoder predictor.
//!
//! A batch of `B` windows is stacked row-wise into one `(B·N_p) × ·` matrix;
//! every row-wise operation (embeddings, projections, feed-forward, layer
//! norm, output head) runs on the whole stack at once and attention is
//! block-diagonal over the `B` windows.

use super::config::ModelConfig;
use super::params::{Attention, DecoderLayer, EncoderLayer, FeedForward, Norm, Weights};
use crate::channel::CsiVector;
use crate::error::{Error, Result};
use crate::tensor::{Tape, Tensor, Var, MASKED};

/// Trained or freshly initialized predictor.
#[derive(Clone, Debug, PartialEq)]
pub struct ModelParams {
    pub config: ModelConfig,
    pub weights: Weights<Tensor>,
}

impl ModelParams {
    pub fn init(config: ModelConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let mut rng = crate::seed::rng(seed);
        Ok(Self {
            config,
            weights: Weights::xavier(&config, &mut rng),
        })
    }
}

/// Fixed sinusoidal encoding: `sin(p/10000^(2i/d))` on even columns,
/// `cos` of the same angle on odd ones.
pub fn positional_encoding(n: usize, d_model: usize) -> Tensor {
    Tensor::from_fn(n, d_model, |p, c| {
        let i = (c / 2) as f64;
        let angle = p as f64 / 10000f64.powf(2.0 * i / d_model as f64);
        if c % 2 == 0 {
            angle.sin()
        } else {
            angle.cos()
        }
    })
}

/// `0` where the key position is not after the query position, [`MASKED`] elsewhere.
pub fn causal_mask(n: usize) -> Tensor {
    Tensor::from_fn(n, n, |i, j| if j <= i { 0.0 } else { MASKED })
}

fn tile_rows(t: &Tensor, times: usize) -> Tensor {
    let mut data = Vec::with_capacity(t.len() * times);
    for _ in 0..times {
        data.extend_from_slice(t.data());
    }
    Tensor::new(&[t.rows() * times, t.cols()], data).expect("tiling preserves length")
}

/// Stacks windows (each `N_p` packets) into a `(B·N_p) × 2M′` matrix.
pub(crate) fn stack_windows(windows: &[&[CsiVector]], n_p: usize, dim: usize) -> Result<Tensor> {
    let mut data = Vec::with_capacity(windows.len() * n_p * dim);
    for w in windows {
        if w.len() != n_p {
            return Err(Error::Shape(format!(
                "window has {} packets, model expects {n_p}",
                w.len()
            )));
        }
        for v in w.iter() {
            if v.len() != dim {
                return Err(Error::Shape(format!(
                    "CSI vector has {} entries, model expects {dim}",
                    v.len()
                )));
            }
            data.extend_from_slice(v.as_slice());
        }
    }
    Tensor::new(&[windows.len() * n_p, dim], data)
}

/// Decoder raw input: per window, packets `N_f+1..N_p` followed by `N_f` zero rows.
pub(crate) fn decoder_raw(stacked: &Tensor, n_p: usize, n_f: usize) -> Tensor {
    let dim = stacked.cols();
    let batch = stacked.rows() / n_p;
    let mut out = Tensor::zeros(&[batch * n_p, dim]);
    for b in 0..batch {
        for r in 0..n_p - n_f {
            let src = stacked.row(b * n_p + n_f + r);
            let start = (b * n_p + r) * dim;
            out.data_mut()[start..start + dim].copy_from_slice(src);
        }
    }
    out
}

/// Records the model on a tape. Weights are supplied as tape variables so the
/// same code serves training (trainable leaves) and inference (constants).
pub(crate) struct Forward<'t> {
    pub tape: &'t mut Tape,
    pub config: ModelConfig,
    pub weights: Weights<Var>,
}

impl<'t> Forward<'t> {
    pub fn new(tape: &'t mut Tape, params: &ModelParams, trainable: bool) -> Self {
        let weights = params.weights.map(|t| {
            if trainable {
                tape.param(t.clone())
            } else {
                tape.constant(t.clone())
            }
        });
        Self {
            tape,
            config: params.config,
            weights,
        }
    }

    fn batch_of(&self, rows: usize) -> usize {
        rows / self.config.n_p
    }

    /// `rows · embed + PE` for stacked raw CSI rows.
    pub fn embed(&mut self, raw: Tensor, embed: Var) -> Result<Var> {
        let batch = self.batch_of(raw.rows());
        let pe = tile_rows(
            &positional_encoding(self.config.n_p, self.config.d_model),
            batch,
        );
        let x = self.tape.constant(raw);
        let e = self.tape.matmul(x, embed)?;
        let pe = self.tape.constant(pe);
        self.tape.add(e, pe)
    }

    /// Block-diagonal multi-head attention; every block has `N_p` query and
    /// `N_p` key rows.
    pub fn attention(
        &mut self,
        q_src: Var,
        k_src: Var,
        v_src: Var,
        attn: &Attention<Var>,
        causal: bool,
    ) -> Result<Var> {
        let n_p = self.config.n_p;
        let d_k = self.config.d_head();
        let batch = self.batch_of(self.tape.value(q_src).rows());
        let mask = causal.then(|| tile_rows(&causal_mask(n_p), batch));
        let q = self.tape.matmul(q_src, attn.wq)?;
        let k = self.tape.matmul(k_src, attn.wk)?;
        let v = self.tape.matmul(v_src, attn.wv)?;
        let scale = 1.0 / (d_k as f64).sqrt();
        let mut heads = Vec::with_capacity(self.config.n_head);
        for h in 0..self.config.n_head {
            let (lo, hi) = (h * d_k, (h + 1) * d_k);
            let qh = self.tape.slice_cols(q, lo, hi)?;
            let kh = self.tape.slice_cols(k, lo, hi)?;
            let vh = self.tape.slice_cols(v, lo, hi)?;
            let scores = self.tape.block_matmul_nt(qh, kh, n_p, n_p)?;
            let scores = self.tape.scale(scores, scale);
            let weights = self.tape.softmax_masked(scores, mask.as_ref())?;
            heads.push(self.tape.block_matmul(weights, vh, n_p, n_p)?);
        }
        let cat = self.tape.concat_cols(&heads)?;
        self.tape.matmul(cat, attn.wo)
    }

    fn feed_forward(&mut self, x: Var, ffn: &FeedForward<Var>) -> Result<Var> {
        let h = self.tape.matmul(x, ffn.w1)?;
        let h = self.tape.add_row(h, ffn.b1)?;
        let h = self.tape.relu(h);
        let o = self.tape.matmul(h, ffn.w2)?;
        self.tape.add_row(o, ffn.b2)
    }

    fn add_norm(&mut self, x: Var, sub: Var, norm: &Norm<Var>) -> Result<Var> {
        let s = self.tape.add(x, sub)?;
        self.tape.layer_norm(s, norm.gain, norm.bias)
    }

    pub fn encoder_layer(&mut self, s: Var, layer: &EncoderLayer<Var>) -> Result<Var> {
        let a = self.attention(s, s, s, &layer.attn, false)?;
        let z = self.add_norm(s, a, &layer.norm1)?;
        let f = self.feed_forward(z, &layer.ffn)?;
        self.add_norm(z, f, &layer.norm2)
    }

    pub fn decoder_layer(&mut self, s: Var, enc: Var, layer: &DecoderLayer<Var>) -> Result<Var> {
        let a = self.attention(s, s, s, &layer.self_attn, true)?;
        let zd = self.add_norm(s, a, &layer.norm1)?;
        let c = self.attention(zd, enc, enc, &layer.cross_attn, false)?;
        let zc = self.add_norm(zd, c, &layer.norm2)?;
        let f = self.feed_forward(zc, &layer.ffn)?;
        self.add_norm(zc, f, &layer.norm3)
    }

    pub fn encoder(&mut self, s: Var) -> Result<Var> {
        let layers = self.weights.encoder.clone();
        layers.iter().try_fold(s, |x, l| self.encoder_layer(x, l))
    }

    /// Decoder stack followed by the CSI-domain output head.
    pub fn decoder(&mut self, s: Var, enc: Var) -> Result<Var> {
        let layers = self.weights.decoder.clone();
        let o = layers.iter().try_fold(s, |x, l| self.decoder_layer(x, enc, l))?;
        let y = self.tape.matmul(o, self.weights.head_w)?;
        self.tape.add_row(y, self.weights.head_b)
    }

    /// Last `N_f` rows of every window block.
    pub fn select(&mut self, out: Var) -> Result<Var> {
        let (n_p, n_f) = (self.config.n_p, self.config.n_f);
        let batch = self.batch_of(self.tape.value(out).rows());
        let rows = (0..batch)
            .flat_map(|b| (n_p - n_f..n_p).map(move |r| b * n_p + r))
            .collect();
        self.tape.gather_rows(out, rows)
    }

    /// Full pass over stacked windows; returns the `(B·N_f) × 2M′` predictions.
    pub fn run(&mut self, stacked: Tensor) -> Result<Var> {
        let (n_p, n_f) = (self.config.n_p, self.config.n_f);
        let dec_raw = decoder_raw(&stacked, n_p, n_f);
        let s_e = self.embed(stacked, self.weights.input_embed)?;
        let s_d = self.embed(dec_raw, self.weights.output_embed)?;
        let enc = self.encoder(s_e)?;
        let out = self.decoder(s_d, enc)?;
        self.select(out)
    }
}

fn window_tensor(params: &ModelParams, window: &[CsiVector]) -> Result<Tensor> {
    stack_windows(&[window], params.config.n_p, params.config.input_dim)
}

/// `𝒮^(e)`: the window (one packet per row) times the input embedding, plus PE.
pub fn build_encoder_input(params: &ModelParams, window: &[CsiVector]) -> Result<Tensor> {
    let x = window_tensor(params, window)?;
    let mut tape = Tape::new();
    let mut f = Forward::new(&mut tape, params, false);
    let v = f.embed(x, f.weights.input_embed)?;
    Ok(tape.value(v).clone())
}

/// Raw decoder sequence: the latest `N_p − N_f` packets, then `N_f` zero packets.
pub fn decoder_input_sequence(window: &[CsiVector], n_f: usize) -> Result<Vec<CsiVector>> {
    if n_f == 0 || n_f >= window.len() {
        return Err(Error::InvalidArgument(format!(
            "need 0 < n_f < window length, got n_f={n_f} with {} packets",
            window.len()
        )));
    }
    let dim = window[0].len();
    let mut out: Vec<CsiVector> = window[n_f..].to_vec();
    out.extend((0..n_f).map(|_| CsiVector::zeros(dim)));
    Ok(out)
}

/// `𝒮^(d)`: the raw decoder sequence times the output embedding, plus PE.
pub fn build_decoder_input(params: &ModelParams, window: &[CsiVector]) -> Result<Tensor> {
    let x = window_tensor(params, window)?;
    let raw = decoder_raw(&x, params.config.n_p, params.config.n_f);
    let mut tape = Tape::new();
    let mut f = Forward::new(&mut tape, params, false);
    let v = f.embed(raw, f.weights.output_embed)?;
    Ok(tape.value(v).clone())
}

/// Multi-head attention of one window (`q_src`, `k_src`, `v_src` all `N_p × d_m`).
pub fn multi_head_attention(
    params: &ModelParams,
    attn: &Attention<Tensor>,
    q_src: &Tensor,
    k_src: &Tensor,
    v_src: &Tensor,
    causal: bool,
) -> Result<Tensor> {
    let expected = [params.config.n_p, params.config.d_model];
    for t in [q_src, k_src, v_src] {
        if t.shape() != expected {
            return Err(Error::Shape(format!(
                "attention source {:?}, expected {expected:?}",
                t.shape()
            )));
        }
    }
    let mut tape = Tape::new();
    let attn_vars = attn.map(&mut |t: &Tensor| tape.constant(t.clone()));
    let (q, k, v) = (
        tape.constant(q_src.clone()),
        tape.constant(k_src.clone()),
        tape.constant(v_src.clone()),
    );
    let mut f = Forward::new(&mut tape, params, false);
    let out = f.attention(q, k, v, &attn_vars, causal)?;
    Ok(tape.value(out).clone())
}

fn check_stack(params: &ModelParams, t: &Tensor, what: &str) -> Result<()> {
    let expected = [params.config.n_p, params.config.d_model];
    if t.shape() != expected {
        return Err(Error::Shape(format!(
            "{what} is {:?}, expected {expected:?}",
            t.shape()
        )));
    }
    Ok(())
}

/// `O^(e)` for one window's encoder input.
pub fn encoder_forward(params: &ModelParams, s_e: &Tensor) -> Result<Tensor> {
    check_stack(params, s_e, "encoder input")?;
    let mut tape = Tape::new();
    let s = tape.constant(s_e.clone());
    let mut f = Forward::new(&mut tape, params, false);
    let out = f.encoder(s)?;
    Ok(tape.value(out).clone())
}

/// Decoder stack and output head: `N_p × 2M′` rows in the CSI domain.
pub fn decoder_forward(params: &ModelParams, s_d: &Tensor, o_e: &Tensor) -> Result<Tensor> {
    check_stack(params, s_d, "decoder input")?;
    check_stack(params, o_e, "encoder output")?;
    let mut tape = Tape::new();
    let s = tape.constant(s_d.clone());
    let e = tape.constant(o_e.clone());
    let mut f = Forward::new(&mut tape, params, false);
    let out = f.decoder(s, e)?;
    Ok(tape.value(out).clone())
}

/// Position selection: the last `n_f` rows of the decoder output, one
/// predicted packet each.
pub fn select_predictions(o_d: &Tensor, n_f: usize) -> Result<Vec<CsiVector>> {
    o_d.expect_matrix("select_predictions")?;
    if n_f == 0 || n_f > o_d.rows() {
        return Err(Error::Shape(format!(
            "cannot select {n_f} rows from {:?}",
            o_d.shape()
        )));
    }
    (o_d.rows() - n_f..o_d.rows())
        .map(|r| CsiVector::new(o_d.row(r).to_vec()))
        .collect()
}

/// Forecasts the next `N_f` packets of each window in one parallel pass.
pub fn predict_batch(params: &ModelParams, windows: &[&[CsiVector]]) -> Result<Vec<Vec<CsiVector>>> {
    if windows.is_empty() {
        return Ok(Vec::new());
    }
    let c = params.config;
    let stacked = stack_windows(windows, c.n_p, c.input_dim)?;
    let mut tape = Tape::new();
    let mut f = Forward::new(&mut tape, params, false);
    let out = f.run(stacked)?;
    let pred = tape.value(out);
    Ok((0..windows.len())
        .map(|b| {
            (0..c.n_f)
                .map(|n| CsiVector::new(pred.row(b * c.n_f + n).to_vec()).expect("even width"))
                .collect()
        })
        .collect())
}

/// Forecasts the `N_f` packets that follow `window`.
pub fn predict(params: &ModelParams, window: &[CsiVector]) -> Result<Vec<CsiVector>> {
    Ok(predict_batch(params, &[window])?.remove(0))
}
