//! Training records as seen by the optimizer.

use crate::error::{Error, Result};

/// Dimensions shared by every record of a dataset.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct RecordShape {
    /// Realified CSI width `2M′`.
    pub dim: usize,
    pub n_p: usize,
    pub n_f: usize,
}

/// Indexed (input window, target window) pairs, both packet-major:
/// `input(i)` holds `n_p·dim` values, `target(i)` holds `n_f·dim`.
pub trait Records {
    fn shape(&self) -> RecordShape;
    fn len(&self) -> usize;
    fn input(&self, i: usize) -> &[f64];
    fn target(&self, i: usize) -> &[f64];

    fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Records stored one after another, as read from a dataset file.
#[derive(Clone, Debug, PartialEq)]
pub struct FlatRecords {
    shape: RecordShape,
    inputs: Vec<f64>,
    targets: Vec<f64>,
}

impl FlatRecords {
    pub fn new(shape: RecordShape) -> Self {
        Self {
            shape,
            inputs: Vec::new(),
            targets: Vec::new(),
        }
    }

    pub fn push(&mut self, input: &[f64], target: &[f64]) -> Result<()> {
        let s = self.shape;
        if input.len() != s.n_p * s.dim || target.len() != s.n_f * s.dim {
            return Err(Error::Shape(format!(
                "record of {}/{} values does not match {s:?}",
                input.len(),
                target.len()
            )));
        }
        self.inputs.extend_from_slice(input);
        self.targets.extend_from_slice(target);
        Ok(())
    }
}

impl Records for FlatRecords {
    fn shape(&self) -> RecordShape {
        self.shape
    }

    fn len(&self) -> usize {
        self.inputs.len() / (self.shape.n_p * self.shape.dim)
    }

    fn input(&self, i: usize) -> &[f64] {
        let n = self.shape.n_p * self.shape.dim;
        &self.inputs[i * n..(i + 1) * n]
    }

    fn target(&self, i: usize) -> &[f64] {
        let n = self.shape.n_f * self.shape.dim;
        &self.targets[i * n..(i + 1) * n]
    }
}
