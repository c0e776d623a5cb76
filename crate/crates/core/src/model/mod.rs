//! Encoder-decoder Transformer that forecasts the next `N_f` CSI vectors from
//! the last `N_p`.
//!
//! Each layer is post-norm: `f_LN(x + sublayer(x))`. The decoder sees the most
//! recent `N_p − N_f` packets followed by `N_f` zero slots and fills the
//! slots in one parallel pass; its masked self-attention keeps every position
//! from looking ahead. A linear head maps the `d_m`-wide decoder rows back to
//! realified CSI.

mod checkpoint;
mod config;
mod loss;
mod params;
mod predictor;
mod records;
mod train;
mod transformer;

pub use checkpoint::{load_checkpoint, save_checkpoint, CHECKPOINT_MAGIC, CHECKPOINT_VERSION};
pub use config::ModelConfig;
pub use loss::{batch_nmse, nmse_loss};
pub use params::{Attention, DecoderLayer, EncoderLayer, FeedForward, Norm, Weights};
pub use predictor::Predictor;
pub use records::{FlatRecords, RecordShape, Records};
pub use train::{
    evaluate_nmse, minibatch_loss_and_grads, train, validation_split, EpochStats, TrainConfig,
    TrainOutcome, Trainer,
};
pub use transformer::{
    build_decoder_input, build_encoder_input, causal_mask, decoder_forward,
    decoder_input_sequence, encoder_forward, multi_head_attention, positional_encoding, predict,
    predict_batch, select_predictions, ModelParams,
};
