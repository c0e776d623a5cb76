//! Channel-prediction-based physical layer authentication.
//!
//! The crate simulates time-varying multipath Wi-Fi channels for a legitimate
//! transmitter and a nearby spoofer, trains an encoder-decoder Transformer to
//! forecast the legitimate CSI, and authenticates packet streams by Pearson
//! correlation against those forecasts.
//!
//! Modules, bottom-up:
//!
//! - [`channel`]: fading taps, OFDM frequency response, noisy CSI.
//! - [`tensor`]: tensors, reverse-mode autodiff and Adam.
//! - [`model`]: the Transformer predictor, training and checkpoints.
//! - [`auth`]: the iterative authenticator and the reference-update benchmark.
//! - [`experiments`]: datasets, metrics and the threshold sweep.

pub mod auth;
pub mod channel;
mod error;
pub mod experiments;
mod fsio;
pub mod model;
pub mod seed;
pub mod tensor;

pub use error::{Error, Result};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/channel.md")]
    mod channel {}
    #[doc = include_str!("../../../book/src/autograd.md")]
    mod autograd {}
    #[doc = include_str!("../../../book/src/transformer.md")]
    mod transformer {}
    #[doc = include_str!("../../../book/src/authentication.md")]
    mod authentication {}
    #[doc = include_str!("../../../book/src/experiments.md")]
    mod experiments {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
