//! Parameter containers, generic over the leaf type so the same layout holds
//! owned tensors, tape variables, gradients or Adam moments.

use rand::Rng;

use super::config::ModelConfig;
use crate::tensor::Tensor;

/// Projections of one multi-head attention block.
///
/// `wq`, `wk`, `wv` are `d_m × d_m`; head `i` uses columns `i·d_k..(i+1)·d_k`,
/// which is the per-head `d_m × d_k` matrix. `wo` is the `d_m × d_m` output
/// projection applied to the concatenated heads.
#[derive(Clone, Debug, PartialEq)]
pub struct Attention<T> {
    pub wq: T,
    pub wk: T,
    pub wv: T,
    pub wo: T,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Norm<T> {
    pub gain: T,
    pub bias: T,
}

#[derive(Clone, Debug, PartialEq)]
pub struct FeedForward<T> {
    pub w1: T,
    pub b1: T,
    pub w2: T,
    pub b2: T,
}

#[derive(Clone, Debug, PartialEq)]
pub struct EncoderLayer<T> {
    pub attn: Attention<T>,
    pub norm1: Norm<T>,
    pub ffn: FeedForward<T>,
    pub norm2: Norm<T>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct DecoderLayer<T> {
    pub self_attn: Attention<T>,
    pub norm1: Norm<T>,
    pub cross_attn: Attention<T>,
    pub norm2: Norm<T>,
    pub ffn: FeedForward<T>,
    pub norm3: Norm<T>,
}

/// Every trainable tensor of the predictor.
#[derive(Clone, Debug, PartialEq)]
pub struct Weights<T> {
    /// `2M′ × d_m`, no bias.
    pub input_embed: T,
    /// `2M′ × d_m`, no bias, untied from the input embedding.
    pub output_embed: T,
    pub encoder: Vec<EncoderLayer<T>>,
    pub decoder: Vec<DecoderLayer<T>>,
    /// `d_m × 2M′` projection back to the CSI domain.
    pub head_w: T,
    pub head_b: T,
}

macro_rules! leaf_struct {
    ($name:ident { $($field:ident),* }) => {
        impl<T> $name<T> {
            pub fn map<U>(&self, f: &mut impl FnMut(&T) -> U) -> $name<U> {
                $name { $($field: f(&self.$field)),* }
            }
            fn collect<'a>(&'a self, out: &mut Vec<&'a T>) {
                $(out.push(&self.$field);)*
            }
            fn collect_mut<'a>(&'a mut self, out: &mut Vec<&'a mut T>) {
                $(out.push(&mut self.$field);)*
            }
        }
    };
}

leaf_struct!(Attention { wq, wk, wv, wo });
leaf_struct!(Norm { gain, bias });
leaf_struct!(FeedForward { w1, b1, w2, b2 });

macro_rules! layer_struct {
    ($name:ident { $($field:ident),* }) => {
        impl<T> $name<T> {
            pub fn map<U>(&self, f: &mut impl FnMut(&T) -> U) -> $name<U> {
                $name { $($field: self.$field.map(f)),* }
            }
            fn collect<'a>(&'a self, out: &mut Vec<&'a T>) {
                $(self.$field.collect(out);)*
            }
            fn collect_mut<'a>(&'a mut self, out: &mut Vec<&'a mut T>) {
                $(self.$field.collect_mut(out);)*
            }
        }
    };
}

layer_struct!(EncoderLayer { attn, norm1, ffn, norm2 });
layer_struct!(DecoderLayer { self_attn, norm1, cross_attn, norm2, ffn, norm3 });

impl<T> Weights<T> {
    pub fn map<U>(&self, mut f: impl FnMut(&T) -> U) -> Weights<U> {
        let f = &mut f;
        Weights {
            input_embed: f(&self.input_embed),
            output_embed: f(&self.output_embed),
            encoder: self.encoder.iter().map(|l| l.map(f)).collect(),
            decoder: self.decoder.iter().map(|l| l.map(f)).collect(),
            head_w: f(&self.head_w),
            head_b: f(&self.head_b),
        }
    }

    /// Leaves in declaration order (the checkpoint order).
    pub fn leaves(&self) -> Vec<&T> {
        let mut out = vec![&self.input_embed, &self.output_embed];
        for l in &self.encoder {
            l.collect(&mut out);
        }
        for l in &self.decoder {
            l.collect(&mut out);
        }
        out.push(&self.head_w);
        out.push(&self.head_b);
        out
    }

    pub fn leaves_mut(&mut self) -> Vec<&mut T> {
        let mut out = vec![&mut self.input_embed, &mut self.output_embed];
        for l in &mut self.encoder {
            l.collect_mut(&mut out);
        }
        for l in &mut self.decoder {
            l.collect_mut(&mut out);
        }
        out.push(&mut self.head_w);
        out.push(&mut self.head_b);
        out
    }
}

impl Weights<Tensor> {
    /// Zero-filled weights with the shapes `config` implies.
    pub fn zeros(config: &ModelConfig) -> Self {
        let d = config.d_model;
        let attn = || Attention {
            wq: Tensor::zeros(&[d, d]),
            wk: Tensor::zeros(&[d, d]),
            wv: Tensor::zeros(&[d, d]),
            wo: Tensor::zeros(&[d, d]),
        };
        let norm = || Norm {
            gain: Tensor::ones(&[d]),
            bias: Tensor::zeros(&[d]),
        };
        let ffn = || FeedForward {
            w1: Tensor::zeros(&[d, config.d_ff]),
            b1: Tensor::zeros(&[config.d_ff]),
            w2: Tensor::zeros(&[config.d_ff, d]),
            b2: Tensor::zeros(&[d]),
        };
        Weights {
            input_embed: Tensor::zeros(&[config.input_dim, d]),
            output_embed: Tensor::zeros(&[config.input_dim, d]),
            encoder: (0..config.n_layers)
                .map(|_| EncoderLayer {
                    attn: attn(),
                    norm1: norm(),
                    ffn: ffn(),
                    norm2: norm(),
                })
                .collect(),
            decoder: (0..config.n_layers)
                .map(|_| DecoderLayer {
                    self_attn: attn(),
                    norm1: norm(),
                    cross_attn: attn(),
                    norm2: norm(),
                    ffn: ffn(),
                    norm3: norm(),
                })
                .collect(),
            head_w: Tensor::zeros(&[d, config.input_dim]),
            head_b: Tensor::zeros(&[config.input_dim]),
        }
    }

    /// Xavier-uniform matrices; layer-norm gains one, every bias zero.
    pub fn xavier(config: &ModelConfig, rng: &mut impl Rng) -> Self {
        let mut w = Self::zeros(config);
        for t in w.leaves_mut() {
            if t.is_matrix() {
                let bound = (6.0 / (t.rows() + t.cols()) as f64).sqrt();
                for v in t.data_mut() {
                    *v = rng.random_range(-bound..bound);
                }
            }
        }
        w
    }

    pub fn num_parameters(&self) -> usize {
        self.leaves().iter().map(|t| t.len()).sum()
    }
}
