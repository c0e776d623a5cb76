use super::transformer::{predict, predict_batch, ModelParams};
use crate::channel::CsiVector;
use crate::error::Result;

/// Anything that forecasts `n_f` CSI vectors from a window of `n_p`.
///
/// The authenticator only talks to this trait, so scripted stubs can stand in
/// for a trained model.
pub trait Predictor {
    fn n_p(&self) -> usize;
    fn n_f(&self) -> usize;
    fn predict(&self, window: &[CsiVector]) -> Result<Vec<CsiVector>>;

    fn predict_batch(&self, windows: &[&[CsiVector]]) -> Result<Vec<Vec<CsiVector>>> {
        windows.iter().map(|w| self.predict(w)).collect()
    }
}

impl Predictor for ModelParams {
    fn n_p(&self) -> usize {
        self.config.n_p
    }

    fn n_f(&self) -> usize {
        self.config.n_f
    }

    fn predict(&self, window: &[CsiVector]) -> Result<Vec<CsiVector>> {
        predict(self, window)
    }

    fn predict_batch(&self, windows: &[&[CsiVector]]) -> Result<Vec<Vec<CsiVector>>> {
        predict_batch(self, windows)
    }
}

impl<P: Predictor + ?Sized> Predictor for &P {
    fn n_p(&self) -> usize {
        (**self).n_p()
    }

    fn n_f(&self) -> usize {
        (**self).n_f()
    }

    fn predict(&self, window: &[CsiVector]) -> Result<Vec<CsiVector>> {
        (**self).predict(window)
    }

    fn predict_batch(&self, windows: &[&[CsiVector]]) -> Result<Vec<Vec<CsiVector>>> {
        (**self).predict_batch(windows)
    }
}
