use std::collections::HashMap;

use super::testset::TestSequence;
use crate::channel::CsiVector;
use crate::error::{invalid, Error, Result};
use crate::model::Predictor;

/// Repeats the last packet of the window `n_f` times.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Persistence {
    pub n_p: usize,
    pub n_f: usize,
}

/// Every predicted packet equals the newest observed one.
pub fn persistence_baseline(window: &[CsiVector], n_f: usize) -> Result<Vec<CsiVector>> {
    let last = window
        .last()
        .ok_or_else(|| invalid!("persistence needs a nonempty window"))?;
    Ok(vec![last.clone(); n_f])
}

impl Predictor for Persistence {
    fn n_p(&self) -> usize {
        self.n_p
    }

    fn n_f(&self) -> usize {
        self.n_f
    }

    fn predict(&self, window: &[CsiVector]) -> Result<Vec<CsiVector>> {
        persistence_baseline(window, self.n_f)
    }
}

/// Stub that knows Bob's trajectories and returns their true continuation.
///
/// The newest packet of a window is looked up bit-exactly; the stub then
/// returns the `n_f` packets that follow it, repeating the final packet past
/// the end of the trajectory.
#[derive(Clone, Debug)]
pub struct GroundTruth {
    n_p: usize,
    n_f: usize,
    trajectories: Vec<Vec<CsiVector>>,
    index: HashMap<Vec<u64>, (usize, usize)>,
}

fn key(v: &CsiVector) -> Vec<u64> {
    v.as_slice().iter().map(|x| x.to_bits()).collect()
}

impl GroundTruth {
    pub fn new(n_p: usize, n_f: usize, trajectories: Vec<Vec<CsiVector>>) -> Self {
        let mut index = HashMap::new();
        for (t, traj) in trajectories.iter().enumerate() {
            for (k, v) in traj.iter().enumerate() {
                index.entry(key(v)).or_insert((t, k));
            }
        }
        Self {
            n_p,
            n_f,
            trajectories,
            index,
        }
    }

    /// Bob's full trajectory (history plus legitimate stream) of each sequence.
    pub fn for_sequences(n_p: usize, n_f: usize, seqs: &[TestSequence]) -> Self {
        Self::new(
            n_p,
            n_f,
            seqs.iter()
                .map(|s| s.h_hist.iter().chain(&s.legit).cloned().collect())
                .collect(),
        )
    }
}

impl Predictor for GroundTruth {
    fn n_p(&self) -> usize {
        self.n_p
    }

    fn n_f(&self) -> usize {
        self.n_f
    }

    fn predict(&self, window: &[CsiVector]) -> Result<Vec<CsiVector>> {
        let last = window
            .last()
            .ok_or_else(|| invalid!("ground-truth stub needs a nonempty window"))?;
        let &(t, k) = self.index.get(&key(last)).ok_or_else(|| {
            Error::InvalidArgument("window does not end on a known legitimate packet".into())
        })?;
        let traj = &self.trajectories[t];
        Ok((1..=self.n_f)
            .map(|m| traj[(k + m).min(traj.len() - 1)].clone())
            .collect())
    }
}
