use crate::error::{invalid, Result};

/// Architecture of the encoder-decoder predictor.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ModelConfig {
    /// Embedding width `d_m`.
    pub d_model: usize,
    pub n_head: usize,
    /// Layers in the encoder, and separately in the decoder.
    pub n_layers: usize,
    pub d_ff: usize,
    /// Input window length `N_p`.
    pub n_p: usize,
    /// Prediction length `N_f`.
    pub n_f: usize,
    /// Realified CSI width `2M′`.
    pub input_dim: usize,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            d_model: 64,
            n_head: 4,
            n_layers: 2,
            d_ff: 128,
            n_p: 20,
            n_f: 5,
            input_dim: 104,
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        if self.d_model < 2 || self.n_head == 0 || !self.d_model.is_multiple_of(self.n_head) {
            return Err(invalid!(
                "d_model ({}) must be at least 2 and divisible by n_head ({})",
                self.d_model,
                self.n_head
            ));
        }
        if self.n_layers == 0 || self.d_ff == 0 || self.input_dim == 0 {
            return Err(invalid!("n_layers, d_ff and input_dim must be positive"));
        }
        if self.n_f == 0 || self.n_f >= self.n_p {
            return Err(invalid!(
                "need 0 < n_f < n_p, got n_f={} n_p={}",
                self.n_f,
                self.n_p
            ));
        }
        Ok(())
    }

    /// Per-head width `d_k = d_m / N_head`.
    pub fn d_head(&self) -> usize {
        self.d_model / self.n_head
    }
}
